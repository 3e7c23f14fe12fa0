//! Reference glyph bitmaps and template matching.

use std::collections::BTreeMap;
use std::path::Path;

use super::{CharSegment, RecognizeError, Result};
use crate::font;
use crate::imaging::{load_pnm, resize_bilinear, save_pnm, threshold_binary, to_grayscale, ImageBuffer, Threshold};

pub const DEFAULT_GLYPH_W: usize = 20;
pub const DEFAULT_GLYPH_H: usize = 30;

/// Bilinear resize to `w × h` followed by re-binarization: values ≥ 128
/// become 255, everything else 0.
pub fn normalize_glyph(mask: &ImageBuffer, w: usize, h: usize) -> Result<ImageBuffer> {
    let mut out = resize_bilinear(mask, w, h)?;
    for v in out.data_mut() {
        *v = if *v >= 128 { 255 } else { 0 };
    }
    Ok(out)
}

/// One binary `glyph_w × glyph_h` template per whitelist character, with
/// ink stored as 255 on a 0 background.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateLibrary {
    glyph_w: usize,
    glyph_h: usize,
    whitelist: Vec<char>,
    templates: Vec<ImageBuffer>,
}

impl TemplateLibrary {
    /// Builds a library from `(char, glyph)` pairs. Each glyph is binarized
    /// with Otsu's threshold (bright ink) and normalized to the glyph size.
    /// The whitelist follows the order of `glyphs`.
    pub fn from_glyphs<I>(glyphs: I, glyph_w: usize, glyph_h: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (char, ImageBuffer)>,
    {
        if glyph_w == 0 || glyph_h == 0 {
            return Err(RecognizeError::Argument(format!("glyph size {glyph_w}x{glyph_h} must be positive")));
        }
        let mut whitelist = Vec::new();
        let mut templates = Vec::new();
        for (c, img) in glyphs {
            if whitelist.contains(&c) {
                return Err(RecognizeError::DuplicateGlyph(c));
            }
            let gray = to_grayscale(&img);
            let binary = threshold_binary(&gray, Threshold::otsu(&gray))?;
            whitelist.push(c);
            templates.push(normalize_glyph(&binary, glyph_w, glyph_h)?);
        }
        if whitelist.is_empty() {
            return Err(RecognizeError::Argument("template library needs at least one glyph".into()));
        }
        Ok(Self { glyph_w, glyph_h, whitelist, templates })
    }

    /// Library for `A–Z0–9` rendered from the built-in bitmap font.
    pub fn builtin() -> Self {
        Self::builtin_sized(DEFAULT_GLYPH_W, DEFAULT_GLYPH_H).expect("default glyph size is valid")
    }

    pub fn builtin_sized(glyph_w: usize, glyph_h: usize) -> Result<Self> {
        let glyphs = font::CHARSET.chars().map(|c| (c, font::render_glyph(c, 6).expect("charset glyph")));
        Self::from_glyphs(glyphs, glyph_w, glyph_h)
    }

    pub fn glyph_size(&self) -> (usize, usize) {
        (self.glyph_w, self.glyph_h)
    }

    pub fn whitelist(&self) -> &[char] {
        &self.whitelist
    }

    pub fn len(&self) -> usize {
        self.whitelist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.whitelist.is_empty()
    }

    pub fn template(&self, c: char) -> Option<&ImageBuffer> {
        self.whitelist.iter().position(|&w| w == c).map(|i| &self.templates[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (char, &ImageBuffer)> {
        self.whitelist.iter().copied().zip(&self.templates)
    }

    /// Writes every template as `<char>.pgm` into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (c, t) in self.iter() {
            save_pnm(t, dir.join(format!("{c}.pgm")))?;
        }
        Ok(())
    }
}

/// Loads `<char>.pgm` glyphs from `dir` for every character of `whitelist`.
///
/// File stems are matched case-insensitively (`a.pgm` supplies `A`); two
/// files for the same character are an error, as are whitelist characters
/// without a file. Other files are ignored.
pub fn build_template_library(
    dir: impl AsRef<Path>,
    whitelist: &[char],
    glyph_w: usize,
    glyph_h: usize,
) -> Result<TemplateLibrary> {
    let dir = dir.as_ref();
    let mut found: BTreeMap<char, std::path::PathBuf> = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if !path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let mut chars = stem.chars().flat_map(char::to_uppercase);
        let (Some(c), None) = (chars.next(), chars.next()) else {
            continue;
        };
        if !whitelist.contains(&c) {
            continue;
        }
        if found.insert(c, path).is_some() {
            return Err(RecognizeError::DuplicateGlyph(c));
        }
    }
    let missing: Vec<char> = whitelist.iter().copied().filter(|c| !found.contains_key(c)).collect();
    if !missing.is_empty() {
        return Err(RecognizeError::MissingGlyphs(missing));
    }
    let mut glyphs = Vec::with_capacity(whitelist.len());
    for &c in whitelist {
        glyphs.push((c, load_pnm(&found[&c])?));
    }
    TemplateLibrary::from_glyphs(glyphs, glyph_w, glyph_h)
}

/// Best-matching whitelist character for a segment and its agreement score,
/// the fraction of normalized pixels equal to the template. Ties go to the
/// earlier whitelist character.
pub fn match_glyph(seg: &CharSegment, lib: &TemplateLibrary) -> (char, f64) {
    let (w, h) = lib.glyph_size();
    let probe = normalize_glyph(&seg.mask, w, h).expect("segment masks are non-empty");
    let probe = probe.data();
    let n = probe.len() as f64;
    let mut best = (lib.whitelist[0], -1.0);
    for (c, t) in lib.iter() {
        let agree = probe.iter().zip(t.data()).filter(|(a, b)| a == b).count();
        let score = agree as f64 / n;
        if score > best.1 {
            best = (c, score);
        }
    }
    best
}
