//! Plain-text pixmap (P3) rendering of an annotated screen.

use std::fmt::Write as _;

use super::{Label, UiError, UiScreen};

pub const MAX_RENDER_DIM: u32 = 4096;

const WHITE: [u8; 3] = [255, 255, 255];
const BLACK: [u8; 3] = [0, 0, 0];
const RED: [u8; 3] = [255, 0, 0];
const BORDER: u32 = 2;
const LABEL_SIZE: u32 = 12;

struct Canvas {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl Canvas {
    fn fill(&mut self, x0: u32, y0: u32, x1: u32, y1: u32, color: [u8; 3]) {
        let (x1, y1) = (x1.min(self.width), y1.min(self.height));
        for y in y0..y1 {
            for x in x0..x1 {
                self.pixels[(y * self.width + x) as usize] = color;
            }
        }
    }
}

/// White canvas, 2px black element borders, and a red marker at the top-left
/// of every labelled element.
pub fn render_ppm(screen: &UiScreen, labels: &[Label]) -> Result<Vec<u8>, UiError> {
    let (width, height) = (screen.width, screen.height);
    if width > MAX_RENDER_DIM || height > MAX_RENDER_DIM {
        return Err(UiError::ScreenTooLarge { width, height, max: MAX_RENDER_DIM });
    }
    let mut canvas = Canvas { width, height, pixels: vec![WHITE; (width * height) as usize] };
    for e in &screen.elements {
        let b = e.bbox;
        let bw = BORDER.min(b.width());
        let bh = BORDER.min(b.height());
        canvas.fill(b.left, b.top, b.right, b.top + bh, BLACK);
        canvas.fill(b.left, b.bottom.saturating_sub(bh), b.right, b.bottom, BLACK);
        canvas.fill(b.left, b.top, b.left + bw, b.bottom, BLACK);
        canvas.fill(b.right.saturating_sub(bw), b.top, b.right, b.bottom, BLACK);
    }
    for label in labels {
        let b = label.bbox;
        canvas.fill(
            b.left,
            b.top,
            b.left + LABEL_SIZE.min(b.width()),
            b.top + LABEL_SIZE.min(b.height()),
            RED,
        );
    }

    let mut out = String::with_capacity((width * height * 12) as usize + 32);
    let _ = write!(out, "P3\n{width} {height}\n255\n");
    for row in canvas.pixels.chunks(width.max(1) as usize) {
        let line: Vec<String> = row.iter().map(|[r, g, b]| format!("{r} {g} {b}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ui::{annotate, BBox, UiElement};

    fn pixel(ppm: &str, width: usize, x: usize, y: usize) -> [u8; 3] {
        let values: Vec<u8> = ppm.split_whitespace().skip(4).map(|v| v.parse().unwrap()).collect();
        let i = (y * width + x) * 3;
        [values[i], values[i + 1], values[i + 2]]
    }

    #[test]
    fn blank_canvas() {
        let s = UiScreen::new("blank", 10, 10, vec![]);
        let out = String::from_utf8(render_ppm(&s, &[]).unwrap()).unwrap();
        assert!(out.starts_with("P3\n10 10\n255\n"));
        let values: Vec<&str> = out.split_whitespace().skip(4).collect();
        assert_eq!(values.len(), 300);
        assert!(values.iter().all(|v| *v == "255"));
    }

    #[test]
    fn label_marker_and_border() {
        let s = UiScreen::new(
            "one",
            40,
            40,
            vec![UiElement::new("button", "Go", BBox::new(5, 5, 35, 35), true)],
        );
        let out = String::from_utf8(render_ppm(&s, &annotate(&s)).unwrap()).unwrap();
        assert_eq!(pixel(&out, 40, 5, 5), RED);
        assert_eq!(pixel(&out, 40, 16, 16), RED);
        assert_eq!(pixel(&out, 40, 34, 20), BLACK);
        assert_eq!(pixel(&out, 40, 20, 33), BLACK);
        assert_eq!(pixel(&out, 40, 20, 20), WHITE);
        assert_eq!(pixel(&out, 40, 0, 0), WHITE);
        assert_eq!(render_ppm(&s, &annotate(&s)).unwrap(), out.into_bytes());
    }

    #[test]
    fn too_large() {
        let s = UiScreen::new("big", 4097, 10, vec![]);
        assert!(matches!(render_ppm(&s, &[]), Err(UiError::ScreenTooLarge { .. })));
    }
}
