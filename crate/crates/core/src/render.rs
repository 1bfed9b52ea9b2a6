//! Offline frame rendering: one SVG per frame with a rect per tracked box,
//! id/class labels, center markers, and a frame-index footer. Colors hash
//! from the track id so an identity keeps its color across frames.

use crate::io::TrackedFrame;
use std::fmt::Write as _;

/// Track-id color: golden-angle hue walk through HSV, fixed S/V.
pub fn track_color(track_id: u64) -> String {
    let hue = (track_id.wrapping_mul(137) % 360) as f64;
    let (s, v) = (0.75, 0.95);
    let c = v * s;
    let x = c * (1.0 - ((hue / 60.0) % 2.0 - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match hue as u32 / 60 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8
    )
}

/// Render one frame. `fps` is a data-provided label (the live loop's FPS
/// readout); pass None for file-based runs so output stays byte-stable.
pub fn render_frame(frame: &TrackedFrame, img_w: f64, img_h: f64, fps: Option<f64>) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{img_w}\" height=\"{img_h}\" viewBox=\"0 0 {img_w} {img_h}\">"
    );
    for b in &frame.boxes {
        let (left, top, _, _) = b.det.box_.corners();
        let color = track_color(b.id);
        let _ = writeln!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            left * img_w,
            top * img_h,
            b.det.box_.w * img_w,
            b.det.box_.h * img_h
        );
        let _ = writeln!(
            svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"{color}\"/>",
            b.det.box_.cx * img_w,
            b.det.box_.cy * img_h
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"14\" fill=\"{color}\">{}:{}</text>",
            left * img_w,
            (top * img_h - 4.0).max(12.0),
            b.id,
            b.det.class_name
        );
    }
    let footer = match fps {
        Some(f) => format!("frame {} | fps {f:.1}", frame.frame_index),
        None => format!("frame {}", frame.frame_index),
    };
    let _ = writeln!(
        svg,
        "<text x=\"8\" y=\"{}\" font-size=\"16\" fill=\"#ffffff\">{footer}</text>",
        img_h - 8.0
    );
    svg.push_str("</svg>\n");
    svg
}
