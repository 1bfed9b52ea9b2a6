//! Stream formats: JSONL (one frame per line) and MOT-style CSV.
//!
//! JSONL line shape:
//! `{"frame": t, "detections": [{"box": [cx,cy,w,h], "conf": c, "class": k,
//! "label": "...", "emb": [..]?, "id": n?}]}`
//! with normalized coordinates. `emb` is optional but must keep one dimension
//! across the stream; `id` is present on tracked/ground-truth streams.
//!
//! MOT CSV: header `#img_w,img_h`, then pixel rows
//! `frame,id,left,top,width,height,conf,class,-1,-1`. The id column is -1 for
//! plain detection streams and is ignored on detection ingest.

use crate::detect::{BBox, Detection, FrameDetections};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Mot,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "mot" | "mot-csv" => Ok(Format::Mot),
            other => Err(Error::Config(format!(
                "unknown format '{other}' (expected jsonl or mot)"
            ))),
        }
    }
}

/// A detection carrying a persistent identity (tracker output, ground truth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedBox {
    pub id: u64,
    pub det: Detection,
}

/// One frame of identified boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedFrame {
    pub frame_index: u64,
    pub boxes: Vec<TrackedBox>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireFrame {
    frame: u64,
    detections: Vec<WireDet>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireDet {
    #[serde(rename = "box")]
    box_: [f64; 4],
    conf: f64,
    class: u32,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emb: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
}

fn validate_detection(line: usize, det: &WireDet) -> Result<()> {
    let [cx, cy, w, h] = det.box_;
    let b = BBox::new(cx, cy, w, h);
    if !b.is_valid() {
        return Err(Error::parse(
            line,
            format!("field box: invalid box [{cx}, {cy}, {w}, {h}]"),
        ));
    }
    if !(0.0..=1.0).contains(&det.conf) || !det.conf.is_finite() {
        return Err(Error::parse(
            line,
            format!("field conf: {} outside [0,1]", det.conf),
        ));
    }
    Ok(())
}

/// Incremental JSONL frame reader. Validates frame ordering and embedding
/// dimension consistency; usable line-by-line for the streaming track mode.
#[derive(Debug, Default)]
pub struct JsonlReader {
    last_frame: Option<u64>,
    emb_dim: Option<usize>,
    line_no: usize,
}

impl JsonlReader {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse one line. Returns `None` for blank lines. `line_no` starts at 1.
    pub fn read_line(&mut self, line: &str) -> Result<Option<TrackedFrame>> {
        self.line_no += 1;
        let line_no = self.line_no;
        if line.trim().is_empty() {
            return Ok(None);
        }
        let wire: WireFrame = serde_json::from_str(line)
            .map_err(|e| Error::parse(line_no, format!("{e}")))?;
        if let Some(prev) = self.last_frame {
            if wire.frame <= prev {
                return Err(Error::parse(
                    line_no,
                    format!("field frame: index {} not greater than previous {prev}", wire.frame),
                ));
            }
        }
        self.last_frame = Some(wire.frame);

        let mut boxes = Vec::with_capacity(wire.detections.len());
        for det in &wire.detections {
            validate_detection(line_no, det)?;
            if let Some(emb) = &det.emb {
                match self.emb_dim {
                    None => self.emb_dim = Some(emb.len()),
                    Some(d) if d != emb.len() => {
                        return Err(Error::parse(
                            line_no,
                            format!(
                                "field emb: dimension {} differs from stream dimension {d}",
                                emb.len()
                            ),
                        ));
                    }
                    _ => {}
                }
            }
            let [cx, cy, w, h] = det.box_;
            boxes.push(TrackedBox {
                id: det.id.unwrap_or(u64::MAX),
                det: Detection {
                    box_: BBox::new(cx, cy, w, h),
                    confidence: det.conf,
                    class_id: det.class,
                    class_name: det.label.clone(),
                    embedding: det.emb.clone(),
                },
            });
        }
        Ok(Some(TrackedFrame {
            frame_index: wire.frame,
            boxes,
        }))
    }
}

fn parse_mot(input: &str) -> Result<Vec<TrackedFrame>> {
    let mut lines = input.lines().enumerate();
    let (img_w, img_h) = loop {
        match lines.next() {
            None => return Ok(Vec::new()),
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => {
                let line_no = i + 1;
                let body = l
                    .trim()
                    .strip_prefix('#')
                    .ok_or_else(|| Error::parse(line_no, "expected header '#img_w,img_h'"))?;
                let parts: Vec<&str> = body.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::parse(line_no, "expected header '#img_w,img_h'"));
                }
                let w: f64 = parts[0]
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, "field img_w: not a number"))?;
                let h: f64 = parts[1]
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, "field img_h: not a number"))?;
                if w <= 0.0 || h <= 0.0 {
                    return Err(Error::parse(line_no, "image size must be positive"));
                }
                break (w, h);
            }
        }
    };

    let mut frames: Vec<TrackedFrame> = Vec::new();
    for (i, l) in lines {
        let line_no = i + 1;
        if l.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = l.trim().split(',').collect();
        if parts.len() != 10 {
            return Err(Error::parse(
                line_no,
                format!("expected 10 comma-separated fields, got {}", parts.len()),
            ));
        }
        let field = |idx: usize, name: &str| -> Result<f64> {
            parts[idx]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(line_no, format!("field {name}: not a number")))
        };
        let frame = field(0, "frame")? as u64;
        let raw_id = field(1, "id")?;
        let left = field(2, "left")?;
        let top = field(3, "top")?;
        let bw = field(4, "width")?;
        let bh = field(5, "height")?;
        let conf = field(6, "conf")?;
        let class = field(7, "class")? as u32;

        let b = BBox::new(
            (left + bw / 2.0) / img_w,
            (top + bh / 2.0) / img_h,
            bw / img_w,
            bh / img_h,
        );
        if !b.is_valid() {
            return Err(Error::parse(
                line_no,
                format!("field box: invalid pixel box ({left}, {top}, {bw}, {bh})"),
            ));
        }
        if !(0.0..=1.0).contains(&conf) {
            return Err(Error::parse(line_no, format!("field conf: {conf} outside [0,1]")));
        }

        let tb = TrackedBox {
            id: if raw_id < 0.0 { u64::MAX } else { raw_id as u64 },
            det: Detection::new(b, conf, class, format!("class{class}")),
        };
        match frames.last_mut() {
            Some(last) if last.frame_index == frame => last.boxes.push(tb),
            Some(last) if last.frame_index > frame => {
                return Err(Error::parse(
                    line_no,
                    format!(
                        "field frame: index {frame} not greater than previous {}",
                        last.frame_index
                    ),
                ));
            }
            _ => frames.push(TrackedFrame {
                frame_index: frame,
                boxes: vec![tb],
            }),
        }
    }
    Ok(frames)
}

/// Insert empty frames for interior gaps so consumers see a contiguous range.
fn fill_gaps(frames: Vec<TrackedFrame>) -> Vec<TrackedFrame> {
    let mut out: Vec<TrackedFrame> = Vec::with_capacity(frames.len());
    for frame in frames {
        if let Some(last) = out.last() {
            for missing in last.frame_index + 1..frame.frame_index {
                out.push(TrackedFrame {
                    frame_index: missing,
                    boxes: Vec::new(),
                });
            }
        }
        out.push(frame);
    }
    out
}

fn parse_identified(input: &str, format: Format) -> Result<Vec<TrackedFrame>> {
    let frames = match format {
        Format::Jsonl => {
            let mut reader = JsonlReader::new();
            let mut frames = Vec::new();
            for line in input.lines() {
                if let Some(frame) = reader.read_line(line)? {
                    frames.push(frame);
                }
            }
            frames
        }
        Format::Mot => parse_mot(input)?,
    };
    Ok(fill_gaps(frames))
}

/// Parse a plain detection stream; any identity column is ignored.
pub fn parse_stream(input: &str, format: Format) -> Result<Vec<FrameDetections>> {
    Ok(parse_identified(input, format)?
        .into_iter()
        .map(|f| FrameDetections {
            frame_index: f.frame_index,
            detections: f.boxes.into_iter().map(|b| b.det).collect(),
        })
        .collect())
}

/// Parse a tracked or ground-truth stream; every box must carry an id.
pub fn parse_tracked(input: &str, format: Format) -> Result<Vec<TrackedFrame>> {
    let frames = parse_identified(input, format)?;
    for f in &frames {
        if f.boxes.iter().any(|b| b.id == u64::MAX) {
            return Err(Error::Correspondence(format!(
                "frame {}: stream has boxes without ids; not usable as tracked/ground truth",
                f.frame_index
            )));
        }
    }
    Ok(frames)
}

fn wire_frame(frame_index: u64, boxes: &[(Option<u64>, &Detection)]) -> WireFrame {
    WireFrame {
        frame: frame_index,
        detections: boxes
            .iter()
            .map(|(id, d)| WireDet {
                box_: [d.box_.cx, d.box_.cy, d.box_.w, d.box_.h],
                conf: d.confidence,
                class: d.class_id,
                label: d.class_name.clone(),
                emb: d.embedding.clone(),
                id: *id,
            })
            .collect(),
    }
}

/// One JSONL line for a frame of plain detections.
pub fn jsonl_line(frame: &FrameDetections) -> String {
    let boxes: Vec<(Option<u64>, &Detection)> =
        frame.detections.iter().map(|d| (None, d)).collect();
    serde_json::to_string(&wire_frame(frame.frame_index, &boxes)).expect("serialize frame")
}

/// One JSONL line for a frame of identified boxes.
pub fn jsonl_tracked_line(frame: &TrackedFrame) -> String {
    let boxes: Vec<(Option<u64>, &Detection)> =
        frame.boxes.iter().map(|b| (Some(b.id), &b.det)).collect();
    serde_json::to_string(&wire_frame(frame.frame_index, &boxes)).expect("serialize frame")
}

pub fn serialize_stream(frames: &[FrameDetections]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&jsonl_line(f));
        out.push('\n');
    }
    out
}

pub fn serialize_tracked(frames: &[TrackedFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&jsonl_tracked_line(f));
        out.push('\n');
    }
    out
}

fn mot_row(out: &mut String, frame: u64, id: i64, det: &Detection, w: f64, h: f64) {
    let (left, top, _, _) = det.box_.corners();
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},-1,-1",
        frame,
        id,
        left * w,
        top * h,
        det.box_.w * w,
        det.box_.h * h,
        det.confidence,
        det.class_id
    );
}

pub fn serialize_stream_mot(frames: &[FrameDetections], img_w: f64, img_h: f64) -> String {
    let mut out = format!("#{img_w},{img_h}\n");
    for f in frames {
        for d in &f.detections {
            mot_row(&mut out, f.frame_index, -1, d, img_w, img_h);
        }
    }
    out
}

pub fn serialize_tracked_mot(frames: &[TrackedFrame], img_w: f64, img_h: f64) -> String {
    let mut out = format!("#{img_w},{img_h}\n");
    for f in frames {
        for b in &f.boxes {
            mot_row(&mut out, f.frame_index, b.id as i64, &b.det, img_w, img_h);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn jsonl_single_frame() {
        let input = r#"{"frame": 0, "detections": [{"box": [0.5,0.5,0.1,0.2], "conf": 0.9, "class": 2, "label": "cycle"}]}"#;
        let frames = parse_stream(input, Format::Jsonl).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].frame_index, 0);
        let d = &frames[0].detections[0];
        assert_eq!(d.box_, BBox::new(0.5, 0.5, 0.1, 0.2));
        assert_eq!(d.confidence, 0.9);
        assert_eq!(d.class_id, 2);
        assert_eq!(d.class_name, "cycle");
        assert!(d.embedding.is_none());
    }

    #[test]
    fn empty_input_yields_empty_stream() {
        assert!(parse_stream("", Format::Jsonl).unwrap().is_empty());
        assert!(parse_stream("", Format::Mot).unwrap().is_empty());
    }

    #[test]
    fn mot_pixel_conversion() {
        // Top-left anchored pixel box (100,120,50,80) at 1000x1000:
        // cx = (100 + 25)/1000 = 0.125, cy = (120 + 40)/1000 = 0.16.
        let input = "#1000,1000\n0,-1,100,120,50,80,1.0,3,-1,-1\n";
        let frames = parse_stream(input, Format::Mot).unwrap();
        let b = frames[0].detections[0].box_;
        assert!((b.cx - 0.125).abs() < 1e-12);
        assert!((b.cy - 0.16).abs() < 1e-12);
        assert!((b.w - 0.05).abs() < 1e-12);
        assert!((b.h - 0.08).abs() < 1e-12);
    }

    #[test]
    fn missing_frames_become_empty() {
        let input = "{\"frame\": 0, \"detections\": []}\n{\"frame\": 3, \"detections\": []}\n";
        let frames = parse_stream(input, Format::Jsonl).unwrap();
        let indices: Vec<u64> = frames.iter().map(|f| f.frame_index).collect();
        assert_eq!(indices, vec![0, 1, 2, 3]);
        assert!(frames[1].detections.is_empty());
    }

    #[test]
    fn malformed_line_names_line_number() {
        let input = "{\"frame\": 0, \"detections\": []}\nnot json\n";
        let err = parse_stream(input, Format::Jsonl).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let input = "{\"frame\": 5, \"detections\": []}\n{\"frame\": 4, \"detections\": []}\n";
        let err = parse_stream(input, Format::Jsonl).unwrap_err();
        assert!(err.to_string().contains("frame"), "{err}");
    }

    #[test]
    fn mixed_embedding_dims_rejected() {
        let input = concat!(
            "{\"frame\": 0, \"detections\": [{\"box\": [0.5,0.5,0.1,0.1], \"conf\": 1.0, \"class\": 0, \"label\": \"a\", \"emb\": [1.0, 0.0]}]}\n",
            "{\"frame\": 1, \"detections\": [{\"box\": [0.5,0.5,0.1,0.1], \"conf\": 1.0, \"class\": 0, \"label\": \"a\", \"emb\": [1.0]}]}\n",
        );
        let err = parse_stream(input, Format::Jsonl).unwrap_err();
        assert!(err.to_string().contains("emb"), "{err}");
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn jsonl_roundtrip_identity_random_streams() {
        let mut rng = Rng::new(21);
        for _ in 0..20 {
            let mut frames = Vec::new();
            let mut t = 0u64;
            for _ in 0..rng.below(6) + 1 {
                let dets: Vec<Detection> = (0..rng.below(5))
                    .map(|k| {
                        let mut d = Detection::new(
                            BBox::new(
                                rng.uniform(0.1, 0.9),
                                rng.uniform(0.1, 0.9),
                                rng.uniform(0.01, 0.3),
                                rng.uniform(0.01, 0.3),
                            ),
                            rng.next_f64(),
                            k as u32,
                            format!("class{k}"),
                        );
                        if rng.next_f64() < 0.5 {
                            d = d.with_embedding(vec![rng.gaussian(), rng.gaussian(), rng.gaussian()]);
                        }
                        d
                    })
                    .collect();
                frames.push(FrameDetections::new(t, dets));
                t += 1; // contiguous frames so gap filling is the identity
            }
            let text = serialize_stream(&frames);
            let parsed = parse_stream(&text, Format::Jsonl).unwrap();
            assert_eq!(parsed, frames);
        }
    }

    #[test]
    fn mot_roundtrip_identity_on_parsed_streams() {
        // Values that came through a MOT parse are fixed points of
        // serialize -> parse.
        let input = "#1920,1080\n\
                     0,7,100,120,50,80,1,3,-1,-1\n\
                     0,9,400,300,60,40,0.5,1,-1,-1\n\
                     2,7,110,130,50,80,0.25,3,-1,-1\n";
        let first = parse_tracked(input, Format::Mot).unwrap();
        let text = serialize_tracked_mot(&first, 1920.0, 1080.0);
        let second = parse_tracked(&text, Format::Mot).unwrap();
        assert_eq!(second, first);
    }

    #[test]
    fn mot_malformed_rows_rejected() {
        let missing_header = "0,-1,100,120,50,80,1.0,3,-1,-1\n";
        let err = parse_stream(missing_header, Format::Mot).unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");

        let short_row = "#1000,1000\n0,-1,100,120,50\n";
        let err2 = parse_stream(short_row, Format::Mot).unwrap_err();
        assert!(err2.to_string().contains("10"), "{err2}");

        let bad_number = "#1000,1000\n0,-1,abc,120,50,80,1.0,3,-1,-1\n";
        let err3 = parse_stream(bad_number, Format::Mot).unwrap_err();
        assert!(err3.to_string().contains("left"), "{err3}");
    }

    #[test]
    fn tracked_requires_ids() {
        let input = "{\"frame\": 0, \"detections\": [{\"box\": [0.5,0.5,0.1,0.1], \"conf\": 1.0, \"class\": 0, \"label\": \"a\"}]}\n";
        assert!(parse_tracked(input, Format::Jsonl).is_err());
        let ok = "{\"frame\": 0, \"detections\": [{\"box\": [0.5,0.5,0.1,0.1], \"conf\": 1.0, \"class\": 0, \"label\": \"a\", \"id\": 4}]}\n";
        let frames = parse_tracked(ok, Format::Jsonl).unwrap();
        assert_eq!(frames[0].boxes[0].id, 4);
    }
}
