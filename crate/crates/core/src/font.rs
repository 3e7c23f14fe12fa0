//! Built-in 5×7 bitmap glyphs for `A–Z` and `0–9`.
//!
//! Used to generate the default template library and synthetic plates.
//! Every glyph is a single 8-connected stroke so segmentation sees one
//! component per character.

use crate::imaging::ImageBuffer;

pub const GLYPH_COLS: usize = 5;
pub const GLYPH_ROWS: usize = 7;

/// The characters covered by the built-in font, in whitelist order.
pub const CHARSET: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

type Bitmap = [&'static str; GLYPH_ROWS];

#[rustfmt::skip]
const GLYPHS: [(char, Bitmap); 36] = [
    ('A', [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('B', ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."]),
    ('C', [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."]),
    ('D', ["###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."]),
    ('E', ["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    ('F', ["#####", "#....", "#....", "####.", "#....", "#....", "#...."]),
    ('G', [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"]),
    ('H', ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('I', [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('J', ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."]),
    ('K', ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"]),
    ('L', ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('M', ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"]),
    ('N', ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"]),
    ('O', [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('P', ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('Q', [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"]),
    ('R', ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    ('S', [".####", "#....", "#....", ".###.", "....#", "....#", "####."]),
    ('T', ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    ('U', ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('V', ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('W', ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."]),
    ('X', ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
    ('Y', ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."]),
    ('Z', ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"]),
    ('0', [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."]),
    ('1', ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('2', [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"]),
    ('3', ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."]),
    ('4', ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."]),
    ('5', ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."]),
    ('6', ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."]),
    ('7', ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."]),
    ('8', [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."]),
    ('9', [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."]),
];

fn bitmap(c: char) -> Option<&'static Bitmap> {
    GLYPHS.iter().find(|(g, _)| *g == c).map(|(_, b)| b)
}

/// Column range `[first, last]` holding ink.
fn ink_columns(b: &Bitmap) -> (usize, usize) {
    let has_ink = |col: usize| b.iter().any(|row| row.as_bytes()[col] == b'#');
    let first = (0..GLYPH_COLS).find(|&c| has_ink(c)).unwrap_or(0);
    let last = (0..GLYPH_COLS).rev().find(|&c| has_ink(c)).unwrap_or(GLYPH_COLS - 1);
    (first, last)
}

pub fn has_glyph(c: char) -> bool {
    bitmap(c).is_some()
}

/// Width in pixels of the ink of `c` at `scale`.
pub fn glyph_width(c: char, scale: usize) -> Option<usize> {
    bitmap(c).map(|b| {
        let (first, last) = ink_columns(b);
        (last - first + 1) * scale
    })
}

/// Renders the ink bounding box of `c` with each font cell drawn as a
/// `scale × scale` block: ink = 255, background = 0.
pub fn render_glyph(c: char, scale: usize) -> Option<ImageBuffer> {
    let b = bitmap(c)?;
    let (first, last) = ink_columns(b);
    let scale = scale.max(1);
    let w = (last - first + 1) * scale;
    let h = GLYPH_ROWS * scale;
    ImageBuffer::from_fn(w, h, |x, y| if b[y / scale].as_bytes()[first + x / scale] == b'#' { 255 } else { 0 }).ok()
}

/// Draws `text` into `canvas` with the top-left ink corner at `(x, y)`,
/// writing `ink` for set cells; characters are separated by `gap` pixels.
/// Unknown characters advance by a full cell without drawing.
pub fn draw_text(canvas: &mut ImageBuffer, text: &str, x: usize, y: usize, scale: usize, gap: usize, ink: u8) {
    let mut pen = x;
    for c in text.chars() {
        match bitmap(c) {
            Some(b) => {
                let (first, last) = ink_columns(b);
                for (row, line) in b.iter().enumerate() {
                    for col in first..=last {
                        if line.as_bytes()[col] != b'#' {
                            continue;
                        }
                        for dy in 0..scale {
                            for dx in 0..scale {
                                let (px, py) = (pen + (col - first) * scale + dx, y + row * scale + dy);
                                if px < canvas.width() && py < canvas.height() {
                                    for ch in 0..canvas.channels() {
                                        canvas.set(px, py, ch, ink);
                                    }
                                }
                            }
                        }
                    }
                }
                pen += (last - first + 1) * scale + gap;
            }
            None => pen += GLYPH_COLS * scale + gap,
        }
    }
}

/// Total ink-to-ink width of `text` rendered with [`draw_text`].
pub fn text_width(text: &str, scale: usize, gap: usize) -> usize {
    let n = text.chars().count();
    let ink: usize = text.chars().map(|c| glyph_width(c, scale).unwrap_or(GLYPH_COLS * scale)).sum();
    ink + gap * n.saturating_sub(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::label_components;

    #[test]
    fn charset_complete() {
        assert_eq!(GLYPHS.len(), CHARSET.chars().count());
        for c in CHARSET.chars() {
            assert!(has_glyph(c), "{c}");
        }
        assert!(!has_glyph('a'));
    }

    #[test]
    fn every_glyph_is_one_component() {
        for c in CHARSET.chars() {
            let g = render_glyph(c, 1).unwrap();
            let mask: Vec<bool> = g.data().iter().map(|&v| v == 255).collect();
            let l = label_components(&mask, g.width(), g.height());
            assert_eq!(l.components.len(), 1, "glyph {c}");
            assert_eq!((l.components[0].width(), l.components[0].height()), (g.width(), g.height()));
        }
    }

    #[test]
    fn glyphs_are_distinct() {
        let all: Vec<_> = CHARSET.chars().map(|c| render_glyph(c, 4).unwrap()).collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j]);
            }
        }
    }

    #[test]
    fn text_layout() {
        let mut canvas = ImageBuffer::new(60, 10, 1).unwrap();
        draw_text(&mut canvas, "I1", 1, 1, 1, 2, 200);
        assert_eq!(text_width("I1", 1, 2), 3 + 2 + 3);
        assert_eq!(canvas.at(1, 1), 200);
        assert_eq!(canvas.at(4, 1), 0);
        assert_eq!(canvas.at(7, 2), 200);
    }
}
