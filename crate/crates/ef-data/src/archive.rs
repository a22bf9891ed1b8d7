//! On-disk episode archive.
//!
//! Layout:
//! ```text
//! <root>/manifest.json            frame size, action dim, episode list
//! <root>/ep_00000/frames.png      vertical strip of RGB frames
//! <root>/ep_00000/steps.csv       one row per step: a0..a{A-1}, reward
//! <root>/ep_00000/meta.json       length / termination flag
//! <root>/ep_00000/masks.png       optional: R=agent, G=tool, B=distractor
//! ```
//! Offline datasets with the same shape (frames plus commanded actions) can
//! be converted into this format for predictor training.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::episode::{Episode, Frame, MaskFrame, MASK_AGENT, MASK_DISTRACTOR, MASK_TOOL};
use crate::DataError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchiveMeta {
    pub frame_h: usize,
    pub frame_w: usize,
    pub action_dim: usize,
    pub has_masks: bool,
    pub episodes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EpisodeMeta {
    length: usize,
    terminated: bool,
}

fn archive_err(path: &Path, msg: impl Into<String>) -> DataError {
    DataError::Archive {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Streaming writer: episodes are written as they arrive, the manifest on
/// `finish`.
pub struct ArchiveWriter {
    root: PathBuf,
    meta: ArchiveMeta,
}

impl ArchiveWriter {
    pub fn create(
        root: impl AsRef<Path>,
        frame_h: usize,
        frame_w: usize,
        action_dim: usize,
        with_masks: bool,
    ) -> Result<Self, DataError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            meta: ArchiveMeta {
                frame_h,
                frame_w,
                action_dim,
                has_masks: with_masks,
                episodes: Vec::new(),
            },
        })
    }

    pub fn add(&mut self, ep: &Episode) -> Result<(), DataError> {
        ep.validate()?;
        let name = format!("ep_{:05}", self.meta.episodes.len());
        let dir = self.root.join(&name);
        fs::create_dir_all(&dir)?;

        write_frame_strip(&dir.join("frames.png"), &ep.frames)?;
        if self.meta.has_masks {
            let masks = ep
                .masks
                .as_ref()
                .ok_or_else(|| archive_err(&dir, "archive expects masks but episode has none"))?;
            write_mask_strip(&dir.join("masks.png"), masks)?;
        }

        let mut w = csv::Writer::from_path(dir.join("steps.csv"))?;
        let mut header: Vec<String> = (0..self.meta.action_dim).map(|i| format!("a{i}")).collect();
        header.push("reward".into());
        w.write_record(&header)?;
        for (a, r) in ep.actions.iter().zip(&ep.rewards) {
            let mut rec: Vec<String> = a.iter().map(|v| v.to_string()).collect();
            rec.push(r.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;

        let emeta = EpisodeMeta { length: ep.len(), terminated: ep.terminated };
        fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&emeta).unwrap())?;

        self.meta.episodes.push(name);
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf, DataError> {
        fs::write(
            self.root.join("manifest.json"),
            serde_json::to_vec_pretty(&self.meta).unwrap(),
        )?;
        Ok(self.root)
    }
}

fn write_frame_strip(path: &Path, frames: &[Frame]) -> Result<(), DataError> {
    let (h, w) = (frames[0].h, frames[0].w);
    let mut img: RgbImage = ImageBuffer::new(w as u32, (h * frames.len()) as u32);
    for (i, f) in frames.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                let base = (y * w + x) * 3;
                img.put_pixel(
                    x as u32,
                    (i * h + y) as u32,
                    Rgb([f.data[base], f.data[base + 1], f.data[base + 2]]),
                );
            }
        }
    }
    img.save(path).map_err(|e| archive_err(path, e.to_string()))
}

fn write_mask_strip(path: &Path, masks: &[MaskFrame]) -> Result<(), DataError> {
    let (h, w) = (masks[0].h, masks[0].w);
    let mut img: RgbImage = ImageBuffer::new(w as u32, (h * masks.len()) as u32);
    for (i, m) in masks.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                let b = m.bits[y * w + x];
                img.put_pixel(
                    x as u32,
                    (i * h + y) as u32,
                    Rgb([
                        if b & MASK_AGENT != 0 { 255 } else { 0 },
                        if b & MASK_TOOL != 0 { 255 } else { 0 },
                        if b & MASK_DISTRACTOR != 0 { 255 } else { 0 },
                    ]),
                );
            }
        }
    }
    img.save(path).map_err(|e| archive_err(path, e.to_string()))
}

fn read_frame_strip(path: &Path, h: usize, w: usize) -> Result<Vec<Frame>, DataError> {
    let img = image::open(path)
        .map_err(|e| archive_err(path, e.to_string()))?
        .into_rgb8();
    if img.width() as usize != w || img.height() as usize % h != 0 {
        return Err(archive_err(
            path,
            format!("strip is {}x{}, expected width {w} and height a multiple of {h}", img.width(), img.height()),
        ));
    }
    let count = img.height() as usize / h;
    let mut frames = Vec::with_capacity(count);
    for i in 0..count {
        let mut data = vec![0u8; h * w * 3];
        for y in 0..h {
            for x in 0..w {
                let p = img.get_pixel(x as u32, (i * h + y) as u32);
                let base = (y * w + x) * 3;
                data[base..base + 3].copy_from_slice(&p.0);
            }
        }
        frames.push(Frame { h, w, data });
    }
    Ok(frames)
}

fn read_mask_strip(path: &Path, h: usize, w: usize) -> Result<Vec<MaskFrame>, DataError> {
    let img = image::open(path)
        .map_err(|e| archive_err(path, e.to_string()))?
        .into_rgb8();
    let count = img.height() as usize / h;
    let mut masks = Vec::with_capacity(count);
    for i in 0..count {
        let mut m = MaskFrame::empty(h, w);
        for y in 0..h {
            for x in 0..w {
                let p = img.get_pixel(x as u32, (i * h + y) as u32);
                let mut b = 0u8;
                if p.0[0] > 127 {
                    b |= MASK_AGENT;
                }
                if p.0[1] > 127 {
                    b |= MASK_TOOL;
                }
                if p.0[2] > 127 {
                    b |= MASK_DISTRACTOR;
                }
                m.bits[y * w + x] = b;
            }
        }
        masks.push(m);
    }
    Ok(masks)
}

/// Load a whole archive into memory.
pub fn read_archive(root: impl AsRef<Path>) -> Result<(ArchiveMeta, Vec<Episode>), DataError> {
    let root = root.as_ref();
    let manifest_path = root.join("manifest.json");
    let bytes = fs::read(&manifest_path)
        .map_err(|e| archive_err(&manifest_path, format!("cannot read manifest: {e}")))?;
    let meta: ArchiveMeta = serde_json::from_slice(&bytes)
        .map_err(|e| archive_err(&manifest_path, format!("malformed manifest: {e}")))?;

    let mut episodes = Vec::with_capacity(meta.episodes.len());
    for (i, name) in meta.episodes.iter().enumerate() {
        let dir = root.join(name);
        let frames = read_frame_strip(&dir.join("frames.png"), meta.frame_h, meta.frame_w)?;

        let emeta_path = dir.join("meta.json");
        let emeta: EpisodeMeta = serde_json::from_slice(
            &fs::read(&emeta_path).map_err(|e| archive_err(&emeta_path, e.to_string()))?,
        )
        .map_err(|e| archive_err(&emeta_path, e.to_string()))?;

        let steps_path = dir.join("steps.csv");
        let mut rd = csv::Reader::from_path(&steps_path)
            .map_err(|e| archive_err(&steps_path, e.to_string()))?;
        let mut actions = Vec::new();
        let mut rewards = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| archive_err(&steps_path, e.to_string()))?;
            if rec.len() != meta.action_dim + 1 {
                return Err(archive_err(
                    &steps_path,
                    format!("row has {} fields, expected {}", rec.len(), meta.action_dim + 1),
                ));
            }
            let mut a = Vec::with_capacity(meta.action_dim);
            for j in 0..meta.action_dim {
                a.push(rec[j].parse::<f64>().map_err(|e| archive_err(&steps_path, e.to_string()))?);
            }
            rewards.push(
                rec[meta.action_dim]
                    .parse::<f64>()
                    .map_err(|e| archive_err(&steps_path, e.to_string()))?,
            );
            actions.push(a);
        }

        let masks = if meta.has_masks {
            Some(read_mask_strip(&dir.join("masks.png"), meta.frame_h, meta.frame_w)?)
        } else {
            None
        };

        let ep = Episode {
            id: i as u64,
            frames,
            actions,
            rewards,
            terminated: emeta.terminated,
            masks,
        };
        if ep.len() != emeta.length {
            return Err(archive_err(
                &dir,
                format!("frame strip has {} frames, meta says {}", ep.len(), emeta.length),
            ));
        }
        ep.validate()?;
        episodes.push(ep);
    }
    Ok((meta, episodes))
}
