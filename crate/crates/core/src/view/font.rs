//! Fixed 5x7 bitmap font for label text. Only digits and angle brackets are
//! needed. At scale 1.0 each font dot is 3x3 pixels.

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;
const DOT_PX: f64 = 3.0;
/// Blank dots between glyphs.
const SPACING: usize = 1;
/// Background padding around the text, in pixels at scale 1.0.
const PAD_PX: f64 = 3.0;

fn rows(c: char) -> Option<[u8; GLYPH_H]> {
    Some(match c {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '<' => [0x02, 0x04, 0x08, 0x10, 0x08, 0x04, 0x02],
        '>' => [0x08, 0x04, 0x02, 0x01, 0x02, 0x04, 0x08],
        _ => return None,
    })
}

fn dot_size(scale: f64) -> usize {
    (DOT_PX * scale).round().max(1.0) as usize
}

fn pad(scale: f64) -> usize {
    (PAD_PX * scale).round() as usize
}

/// Size of the text's background box (text plus padding) in pixels.
pub fn label_extent(text: &str, scale: f64) -> (usize, usize) {
    let d = dot_size(scale);
    let n = text.chars().count().max(1);
    let w = (n * (GLYPH_W + SPACING) - SPACING) * d;
    let h = GLYPH_H * d;
    (w + 2 * pad(scale), h + 2 * pad(scale))
}

/// Pixel offsets (relative to the top-left of the background box) of every
/// lit font dot pixel.
pub fn lit_pixels(text: &str, scale: f64) -> Vec<(usize, usize)> {
    let d = dot_size(scale);
    let p = pad(scale);
    let mut out = Vec::new();
    for (i, c) in text.chars().enumerate() {
        let Some(glyph) = rows(c) else { continue };
        let gx = p + i * (GLYPH_W + SPACING) * d;
        for (r, bits) in glyph.iter().enumerate() {
            for col in 0..GLYPH_W {
                if bits & (1 << (GLYPH_W - 1 - col)) == 0 {
                    continue;
                }
                for dy in 0..d {
                    for dx in 0..d {
                        out.push((gx + col * d + dx, p + r * d + dy));
                    }
                }
            }
        }
    }
    out
}
