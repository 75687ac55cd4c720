//! On-disk containers for rendered videos and audio tracks.
//!
//! Both formats are a fixed magic, a little-endian header, and a
//! deflate-compressed payload. Frames quantize to u8 per channel and
//! audio to i16 — plenty for synthetic footage, and it keeps a corpus of
//! hundreds of clips in the tens of megabytes.

use super::audio::{AudioTrack, Mood};
use crate::fx::{Frame, Shot};
use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use ndarray::Array3;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

const FRAMES_MAGIC: &[u8; 8] = b"VTFRAME1";
const AUDIO_MAGIC: &[u8; 8] = b"VTAUDIO1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic in {0}")]
    BadMagic(String),
    #[error("corrupt container: {0}")]
    Corrupt(String),
}

fn write_u32(w: &mut impl Write, v: u32) -> Result<(), StoreError> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f32(w: &mut impl Write, v: f32) -> Result<(), StoreError> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, StoreError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32(r: &mut impl Read) -> Result<f32, StoreError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(f32::from_le_bytes(buf))
}

/// Writes frames as `VTFRAME1 | n h w | fps | deflate(u8 rgb)`.
pub fn save_frames(path: &Path, frames: &[Frame], fps: f32) -> Result<(), StoreError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FRAMES_MAGIC)?;
    let (h, wd) = if frames.is_empty() {
        (0, 0)
    } else {
        (frames[0].height(), frames[0].width())
    };
    write_u32(&mut w, frames.len() as u32)?;
    write_u32(&mut w, h as u32)?;
    write_u32(&mut w, wd as u32)?;
    write_f32(&mut w, fps)?;
    let mut enc = DeflateEncoder::new(w, Compression::fast());
    let mut row = Vec::with_capacity(wd * 3);
    for f in frames {
        for y in 0..h {
            row.clear();
            for x in 0..wd {
                for c in 0..3 {
                    let v = f.pixels[[y, x, c]].clamp(0.0, 1.0);
                    row.push((v * 255.0).round() as u8);
                }
            }
            enc.write_all(&row)?;
        }
    }
    enc.finish()?.flush()?;
    Ok(())
}

pub fn load_frames(path: &Path) -> Result<(Vec<Frame>, f32), StoreError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != FRAMES_MAGIC {
        return Err(StoreError::BadMagic(path.display().to_string()));
    }
    let n = read_u32(&mut r)? as usize;
    let h = read_u32(&mut r)? as usize;
    let w = read_u32(&mut r)? as usize;
    let fps = read_f32(&mut r)?;
    let mut dec = DeflateDecoder::new(r);
    let mut payload = Vec::new();
    dec.read_to_end(&mut payload)?;
    let expected = n * h * w * 3;
    if payload.len() != expected {
        return Err(StoreError::Corrupt(format!(
            "{}: payload {} bytes, expected {}",
            path.display(),
            payload.len(),
            expected
        )));
    }
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let chunk = &payload[i * h * w * 3..(i + 1) * h * w * 3];
        let floats: Vec<f32> = chunk.iter().map(|&b| b as f32 / 255.0).collect();
        let pixels = Array3::from_shape_vec((h, w, 3), floats)
            .map_err(|e| StoreError::Corrupt(e.to_string()))?;
        frames.push(Frame::new(pixels));
    }
    Ok((frames, fps))
}

/// Convenience wrapper that reloads into a [`Shot`].
pub fn load_shot(path: &Path) -> Result<Shot, StoreError> {
    let (frames, fps) = load_frames(path)?;
    Shot::new(frames, fps).map_err(|e| StoreError::Corrupt(e.to_string()))
}

/// Writes audio as `VTAUDIO1 | sr | n | mood | tempo | deflate(i16)`.
pub fn save_audio(path: &Path, track: &AudioTrack) -> Result<(), StoreError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(AUDIO_MAGIC)?;
    write_u32(&mut w, track.sample_rate)?;
    write_u32(&mut w, track.samples.len() as u32)?;
    let mood = match track.mood {
        Mood::Soft => 0u32,
        Mood::Energetic => 1u32,
    };
    write_u32(&mut w, mood)?;
    write_f32(&mut w, track.tempo_bpm)?;
    let mut enc = DeflateEncoder::new(w, Compression::fast());
    for &s in &track.samples {
        let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        enc.write_all(&q.to_le_bytes())?;
    }
    enc.finish()?.flush()?;
    Ok(())
}

pub fn load_audio(path: &Path) -> Result<AudioTrack, StoreError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != AUDIO_MAGIC {
        return Err(StoreError::BadMagic(path.display().to_string()));
    }
    let sample_rate = read_u32(&mut r)?;
    let n = read_u32(&mut r)? as usize;
    let mood = match read_u32(&mut r)? {
        0 => Mood::Soft,
        1 => Mood::Energetic,
        other => return Err(StoreError::Corrupt(format!("mood tag {other}"))),
    };
    let tempo_bpm = read_f32(&mut r)?;
    let mut dec = DeflateDecoder::new(r);
    let mut payload = Vec::new();
    dec.read_to_end(&mut payload)?;
    if payload.len() != n * 2 {
        return Err(StoreError::Corrupt(format!(
            "{}: payload {} bytes, expected {}",
            path.display(),
            payload.len(),
            n * 2
        )));
    }
    let samples = payload
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32767.0)
        .collect();
    Ok(AudioTrack {
        samples,
        sample_rate,
        mood,
        tempo_bpm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::generate_audio;
    use crate::synthgen::{Brightness, Motion, SceneSpec};

    #[test]
    fn frames_round_trip_within_quantization() {
        let dir = std::env::temp_dir().join("vtrec-store-frames");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("clip.vframes");
        let spec = SceneSpec {
            motion: Motion::PanRight,
            brightness: Brightness::Bright,
            texture_seed: 11,
        };
        let shot = crate::synthgen::generate_shot(&spec, 0.5, 12.0, 16, 20);
        save_frames(&path, &shot.frames, shot.fps).unwrap();
        let (frames, fps) = load_frames(&path).unwrap();
        assert_eq!(fps, 12.0);
        assert_eq!(frames.len(), shot.frames.len());
        for (a, b) in shot.frames.iter().zip(&frames) {
            // u8 quantization: half a step of 1/255.
            assert!(a.close_to(b, 0.5 / 255.0 + 1e-6));
        }
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn audio_round_trips_within_quantization() {
        let dir = std::env::temp_dir().join("vtrec-store-audio");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("track.audio");
        let track = generate_audio(Mood::Energetic, 120.0, 2.0, 8000, 5);
        save_audio(&path, &track).unwrap();
        let back = load_audio(&path).unwrap();
        assert_eq!(back.sample_rate, 8000);
        assert_eq!(back.mood, Mood::Energetic);
        assert_eq!(back.tempo_bpm, 120.0);
        assert_eq!(back.samples.len(), track.samples.len());
        for (a, b) in track.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32767.0 + 1e-6);
        }
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = std::env::temp_dir().join("vtrec-store-magic");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bogus.vframes");
        std::fs::write(&path, b"NOTMAGIC________").unwrap();
        assert!(matches!(load_frames(&path), Err(StoreError::BadMagic(_))));
        assert!(matches!(load_audio(&path), Err(StoreError::BadMagic(_))));
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn detects_truncation() {
        let dir = std::env::temp_dir().join("vtrec-store-trunc");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trunc.vframes");
        let spec = SceneSpec {
            motion: Motion::Static,
            brightness: Brightness::Dark,
            texture_seed: 1,
        };
        let shot = crate::synthgen::generate_shot(&spec, 0.4, 10.0, 8, 8);
        save_frames(&path, &shot.frames, shot.fps).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(load_frames(&path).is_err());
        std::fs::remove_file(&path).unwrap();
    }
}
