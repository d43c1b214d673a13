//! Plain-text point cloud logs.
//!
//! ```text
//! # comment
//! FRAME <t> <x> <y> <theta>
//! <x> <y> <z> <intensity>
//! ...
//! ```
//!
//! Points are in the robot frame; the header carries the world pose.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::Pose2D;
use crate::layers::{LidarPoint, PointCloudFrame};

fn parse_fields<const K: usize>(fields: &[&str], line: usize) -> Result<[f64; K]> {
    if fields.len() != K {
        return Err(Error::FrameFormat {
            line,
            msg: format!("expected {K} numbers, found {}", fields.len()),
        });
    }
    let mut out = [0.0; K];
    for (o, f) in out.iter_mut().zip(fields) {
        *o = f.parse().map_err(|_| Error::FrameFormat {
            line,
            msg: format!("not a number: {f:?}"),
        })?;
    }
    Ok(out)
}

pub fn read_frames<R: BufRead>(r: R) -> Result<Vec<PointCloudFrame>> {
    let mut frames: Vec<PointCloudFrame> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields[0] == "FRAME" {
            let [t, x, y, th] = parse_fields::<4>(&fields[1..], lineno)?;
            if let Some(prev) = frames.last() {
                if !(t > prev.timestamp) {
                    return Err(Error::FrameFormat {
                        line: lineno,
                        msg: format!("timestamp {t} does not follow {}", prev.timestamp),
                    });
                }
            }
            frames.push(PointCloudFrame {
                points: Vec::new(),
                timestamp: t,
                pose: Pose2D::new(x, y, th),
            });
        } else {
            let [x, y, z, intensity] = parse_fields::<4>(&fields, lineno)?;
            let frame = frames.last_mut().ok_or(Error::FrameFormat {
                line: lineno,
                msg: "point before the first FRAME header".into(),
            })?;
            frame.points.push(LidarPoint::new(x, y, z, intensity));
        }
    }
    Ok(frames)
}

pub fn write_frame<W: Write>(w: &mut W, frame: &PointCloudFrame) -> Result<()> {
    let p = &frame.pose;
    writeln!(w, "FRAME {} {} {} {}", frame.timestamp, p.x(), p.y(), p.heading())?;
    for pt in &frame.points {
        writeln!(w, "{} {} {} {}", pt.x, pt.y, pt.z, pt.intensity)?;
    }
    Ok(())
}

pub fn write_frames<W: Write>(mut w: W, frames: &[PointCloudFrame]) -> Result<()> {
    for f in frames {
        write_frame(&mut w, f)?;
    }
    Ok(())
}
