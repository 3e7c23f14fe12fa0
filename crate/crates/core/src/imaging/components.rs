//! 8-connected component labeling of binary masks.

/// Bounding extent and size of one connected component. `x1`/`y1` are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub label: u32,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub area: usize,
}

impl Component {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }
}

/// Label map (0 = background, components numbered from 1 in raster order of
/// their first pixel) plus per-component statistics indexed by `label - 1`.
#[derive(Debug, Clone)]
pub struct Labeling {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub components: Vec<Component>,
}

/// Two-pass union-find labeling with 8-connectivity over `mask` (row-major).
pub fn label_components(mask: &[bool], width: usize, height: usize) -> Labeling {
    assert_eq!(mask.len(), width * height, "mask size mismatch");
    let mut labels = vec![0u32; mask.len()];
    let mut parent: Vec<u32> = vec![0];

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    fn union(parent: &mut [u32], a: u32, b: u32) -> u32 {
        let ra = find(parent, a);
        let rb = find(parent, b);
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
        lo
    }

    fn visit(n: u32, current: &mut u32, parent: &mut [u32]) {
        if n != 0 {
            *current = if *current == 0 { find(parent, n) } else { union(parent, *current, n) };
        }
    }

    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !mask[i] {
                continue;
            }
            let mut current = 0u32;
            if x > 0 {
                visit(labels[i - 1], &mut current, &mut parent);
            }
            if y > 0 {
                let up = i - width;
                if x > 0 {
                    visit(labels[up - 1], &mut current, &mut parent);
                }
                visit(labels[up], &mut current, &mut parent);
                if x + 1 < width {
                    visit(labels[up + 1], &mut current, &mut parent);
                }
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            labels[i] = current;
        }
    }

    // resolve to dense labels in first-seen raster order
    let mut dense = vec![0u32; parent.len()];
    let mut components: Vec<Component> = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if labels[i] == 0 {
                continue;
            }
            let root = find(&mut parent, labels[i]) as usize;
            if dense[root] == 0 {
                components.push(Component {
                    label: components.len() as u32 + 1,
                    x0: x,
                    y0: y,
                    x1: x + 1,
                    y1: y + 1,
                    area: 0,
                });
                dense[root] = components.len() as u32;
            }
            let label = dense[root];
            labels[i] = label;
            let c = &mut components[label as usize - 1];
            c.x0 = c.x0.min(x);
            c.x1 = c.x1.max(x + 1);
            c.y1 = c.y1.max(y + 1);
            c.area += 1;
        }
    }
    Labeling { width, height, labels, components }
}
