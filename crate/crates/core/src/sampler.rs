//! Uniform frame sampling and extraction.
//!
//! Planning is pure integer math; extraction reads pre-extracted frame
//! directories directly and shells out to a configurable external decoder for
//! container files. Frame directories are the first-class path: the whole
//! test suite runs without any video codec installed.

use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Frame, VideoRef, VideoSource};

/// Still-image encoding used for transport to the captioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Png,
    Jpeg,
}

impl ImageFormat {
    fn matches_extension(self, path: &Path) -> bool {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        matches!(
            (self, ext.as_deref()),
            (ImageFormat::Png, Some("png")) | (ImageFormat::Jpeg, Some("jpg" | "jpeg"))
        )
    }
}

/// External decoder invocation templates.
///
/// `extract_command` receives `{input}`, `{indices}` (comma-separated source
/// indices) and `{outdir}`, and must leave one image file per index in
/// `{outdir}`, named by the zero-padded (8-digit) source index. The default
/// templates drive ffmpeg/ffprobe; any program honoring the contract works.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub probe_command: String,
    pub extract_command: String,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            probe_command: "ffprobe -v error -select_streams v:0 -count_frames \
                            -show_entries stream=nb_read_frames \
                            -of default=nokey=1:noprint_wrappers=1 \"{input}\""
                .into(),
            extract_command: "for i in $(printf '%s' '{indices}' | tr ',' ' '); do \
                              ffmpeg -v error -y -i \"{input}\" -vf \"select=eq(n\\,${i})\" \
                              -vsync 0 -frames:v 1 \
                              \"{outdir}/$(printf '%08d' \"${i}\").png\" || exit 1; done"
                .into(),
        }
    }
}

/// Frame sampling configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Frames sampled per video; the plan degrades to every frame when the
    /// video is shorter.
    pub n_frames: usize,
    /// Frames larger than this on their longest side are downscaled,
    /// preserving aspect, before transport.
    pub image_max_side: u32,
    pub image_format: ImageFormat,
    /// Frame rate used to convert clip spans (seconds) into frame windows.
    /// When absent, spans are ignored and the whole video is sampled.
    pub clip_fps: Option<f64>,
    pub decoder: DecoderConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_frames: 64,
            image_max_side: 384,
            image_format: ImageFormat::Jpeg,
            clip_fps: None,
            decoder: DecoderConfig::default(),
        }
    }
}

/// Plans `n` uniformly spaced source indices over `total_frames` frames by
/// the center-of-bin rule `floor((i + 0.5) * total / n)`.
///
/// When the video has fewer frames than requested, every frame is returned
/// exactly once and the effective count shrinks; duplicating frames would add
/// no information downstream.
pub fn plan_indices(total_frames: usize, n: usize) -> Result<Vec<usize>> {
    if total_frames == 0 {
        return Err(Error::EmptyVideo("zero frames to sample from".into()));
    }
    if n == 0 {
        return Err(Error::Validation("sample count must be >= 1".into()));
    }
    if total_frames <= n {
        return Ok((0..total_frames).collect());
    }
    let total = total_frames as u64;
    let n64 = n as u64;
    Ok((0..n64)
        .map(|i| (((2 * i + 1) * total) / (2 * n64)) as usize)
        .collect())
}

/// [`plan_indices`] restricted to the clip span recorded on the video, when
/// both a span and a frame rate are available.
pub fn plan_for_video(
    video: &VideoRef,
    total_frames: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<usize>> {
    let window = match (cfg.clip_fps, video.start_s, video.end_s) {
        (Some(fps), Some(start), Some(end)) if fps > 0.0 && end > start => {
            let lo = ((start * fps).floor().max(0.0) as usize).min(total_frames.saturating_sub(1));
            let hi = ((end * fps).ceil() as usize).clamp(lo + 1, total_frames);
            lo..hi
        }
        _ => 0..total_frames,
    };
    let inner = plan_indices(window.end - window.start, cfg.n_frames)?;
    Ok(inner.into_iter().map(|i| i + window.start).collect())
}

/// Counts the frames available in a source.
pub fn probe(video: &VideoRef, decoder: &DecoderConfig) -> Result<usize> {
    match &video.source {
        VideoSource::FrameDir { path } => {
            let files = list_frame_files(path)?;
            if files.is_empty() {
                return Err(Error::EmptyVideo(format!(
                    "no image files in {}",
                    path.display()
                )));
            }
            Ok(files.len())
        }
        VideoSource::VideoFile { path } => {
            if !path.is_file() {
                return Err(Error::Source(format!("missing file: {}", path.display())));
            }
            let cmd = decoder
                .probe_command
                .replace("{input}", &path.to_string_lossy());
            let out = Command::new("sh")
                .arg("-c")
                .arg(&cmd)
                .output()
                .map_err(|e| Error::Source(format!("probe spawn failed: {e}")))?;
            if !out.status.success() {
                return Err(Error::Source(format!(
                    "probe command failed ({}): {}",
                    out.status,
                    String::from_utf8_lossy(&out.stderr).trim()
                )));
            }
            let text = String::from_utf8_lossy(&out.stdout);
            let count: usize = text.trim().parse().map_err(|_| {
                Error::Source(format!("probe output not a frame count: {:?}", text.trim()))
            })?;
            if count == 0 {
                return Err(Error::EmptyVideo(path.display().to_string()));
            }
            Ok(count)
        }
    }
}

/// Extracts the planned frames, in plan order, re-encoded per config.
///
/// `indices` must be strictly increasing and within the probed frame count.
pub fn extract(video: &VideoRef, indices: &[usize], cfg: &SamplerConfig) -> Result<Vec<Frame>> {
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation(
            "frame indices must be strictly increasing".into(),
        ));
    }
    if indices.is_empty() {
        return Ok(Vec::new());
    }
    match &video.source {
        VideoSource::FrameDir { path } => {
            let files = list_frame_files(path)?;
            let mut frames = Vec::with_capacity(indices.len());
            for (pos, &src_idx) in indices.iter().enumerate() {
                let file = files.get(src_idx).ok_or_else(|| {
                    Error::Source(format!(
                        "frame index {} beyond directory {} ({} files)",
                        src_idx,
                        path.display(),
                        files.len()
                    ))
                })?;
                let bytes = transport_encode(file, cfg)
                    .map_err(|e| Error::Source(format!("frame {src_idx}: {e}")))?;
                frames.push(Frame {
                    index: pos,
                    source_index: src_idx,
                    image_bytes: bytes,
                });
            }
            Ok(frames)
        }
        VideoSource::VideoFile { path } => extract_via_decoder(path, indices, cfg),
    }
}

fn extract_via_decoder(input: &Path, indices: &[usize], cfg: &SamplerConfig) -> Result<Vec<Frame>> {
    let outdir = tempfile::tempdir().map_err(|e| Error::Source(format!("tempdir: {e}")))?;
    let joined = indices
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let cmd = cfg
        .decoder
        .extract_command
        .replace("{input}", &input.to_string_lossy())
        .replace("{indices}", &joined)
        .replace("{outdir}", &outdir.path().to_string_lossy());
    let out = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .output()
        .map_err(|e| Error::Source(format!("decoder spawn failed: {e}")))?;
    if !out.status.success() {
        return Err(Error::Source(format!(
            "decoder command failed ({}): {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let mut frames = Vec::with_capacity(indices.len());
    for (pos, &src_idx) in indices.iter().enumerate() {
        let file = find_decoded_frame(outdir.path(), src_idx)?;
        let bytes = transport_encode(&file, cfg)
            .map_err(|e| Error::Source(format!("frame {src_idx}: {e}")))?;
        frames.push(Frame {
            index: pos,
            source_index: src_idx,
            image_bytes: bytes,
        });
    }
    Ok(frames)
}

fn find_decoded_frame(dir: &Path, source_index: usize) -> Result<PathBuf> {
    let stem = format!("{:08}", source_index);
    for ext in IMAGE_EXTENSIONS {
        let candidate = dir.join(format!("{stem}.{ext}"));
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(Error::Source(format!(
        "decoder did not emit a frame named {stem}.* for index {source_index}"
    )))
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "webp"];

/// Lists the image files of a frame directory in strict lexicographic
/// filename order.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Source(format!(
            "missing frame directory: {}",
            dir.display()
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Source(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                    .unwrap_or(false)
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Re-encodes one on-disk still for transport.
///
/// Files already within the size bound and in the target format pass through
/// byte-identically; everything else is decoded, downscaled to fit the bound
/// (aspect preserved), and re-encoded.
fn transport_encode(path: &Path, cfg: &SamplerConfig) -> Result<Vec<u8>> {
    let (w, h) = image::image_dimensions(path)
        .map_err(|e| Error::Source(format!("{}: {e}", path.display())))?;
    let within_bound = w.max(h) <= cfg.image_max_side;
    if within_bound && cfg.image_format.matches_extension(path) {
        return std::fs::read(path).map_err(|e| Error::Source(format!("{}: {e}", path.display())));
    }
    let img = image::open(path).map_err(|e| Error::Source(format!("{}: {e}", path.display())))?;
    let img = if within_bound {
        img
    } else {
        img.resize(
            cfg.image_max_side,
            cfg.image_max_side,
            image::imageops::FilterType::Lanczos3,
        )
    };
    encode_image(&img, cfg.image_format)
}

/// Encodes a decoded image in the transport format with fixed settings, so
/// identical pixels always produce identical bytes.
pub fn encode_image(img: &image::DynamicImage, format: ImageFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        ImageFormat::Png => {
            img.write_to(&mut Cursor::new(&mut buf), image::ImageFormat::Png)
                .map_err(|e| Error::Source(format!("png encode: {e}")))?;
        }
        ImageFormat::Jpeg => {
            let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut buf, 85);
            img.to_rgb8()
                .write_with_encoder(enc)
                .map_err(|e| Error::Source(format!("jpeg encode: {e}")))?;
        }
    }
    Ok(buf)
}
