//! Real-time replay: a producer thread paces recorded frames onto a bounded
//! queue as length-prefixed byte records, and the consumer runs
//! preprocessing and inference one frame at a time.

use std::io::Read;
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread;
use std::time::{Duration, Instant};

use capglove::dataset::format::{decode_record, encode_record};
use capglove::models::reconstructor::SlidingWindow;
use capglove::models::argmax;
use capglove::{Exec, Frame, PointCloud15};

use crate::commands::{load_task_dataset, Model};
use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};

pub const QUEUE_FRAMES: usize = 16;
/// Largest record the reader accepts (a 28-channel frame with a target).
const MAX_RECORD: usize = 303;

/// One length-prefixed record: `u32` little-endian length, then the record.
pub fn encode_stream_record(frame: &Frame) -> Vec<u8> {
    let mut body = Vec::with_capacity(MAX_RECORD);
    encode_record(frame, &mut body);
    let mut out = (body.len() as u32).to_le_bytes().to_vec();
    out.extend_from_slice(&body);
    out
}

/// Reads the next record; `Ok(None)` on a clean end of stream.
pub fn read_stream_record<R: Read>(r: &mut R, channels: usize) -> Result<Option<Frame>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(PipelineError::Protocol(e.to_string())),
    }
    let len = u32::from_le_bytes(len) as usize;
    if len > MAX_RECORD {
        return Err(PipelineError::Protocol(format!("record length {len} exceeds {MAX_RECORD}")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(|e| PipelineError::Protocol(format!("truncated record: {e}")))?;
    let frame = decode_record(&body, channels).map_err(|e| PipelineError::Protocol(e.to_string()))?;
    if frame.channels.len() != channels {
        return Err(PipelineError::Protocol(format!("{} channels, expected {channels}", frame.channels.len())));
    }
    Ok(Some(frame))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Prediction {
    Gesture(usize),
    Pose(PointCloud15),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamStats {
    pub frames: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    /// Frames whose latency exceeded one frame period.
    pub dropped_deadlines: usize,
    pub wall_s: f64,
}

impl StreamStats {
    fn from_latencies(mut ms: Vec<f64>, deadline_ms: f64, wall_s: f64) -> Self {
        let dropped_deadlines = ms.iter().filter(|&&l| l > deadline_ms).count();
        ms.sort_by(f64::total_cmp);
        let pct = |p: f64| {
            if ms.is_empty() {
                return 0.0;
            }
            let rank = (p * ms.len() as f64).ceil() as usize;
            ms[rank.clamp(1, ms.len()) - 1]
        };
        StreamStats {
            frames: ms.len(),
            mean_ms: if ms.is_empty() { 0.0 } else { ms.iter().sum::<f64>() / ms.len() as f64 },
            p95_ms: pct(0.95),
            p99_ms: pct(0.99),
            max_ms: ms.last().copied().unwrap_or(0.0),
            dropped_deadlines,
            wall_s,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "frames = {}\nmean_ms = {:.4}\np95_ms = {:.4}\np99_ms = {:.4}\nmax_ms = {:.4}\ndropped_deadlines = {}\nwall_s = {:.3}\n",
            self.frames, self.mean_ms, self.p95_ms, self.p99_ms, self.max_ms, self.dropped_deadlines, self.wall_s
        )
    }
}

/// Per-frame inference state for a live stream.
struct Consumer<'a> {
    model: &'a Model,
    prep: capglove::dataset::StreamPreprocessor<'a>,
    window: SlidingWindow,
}

impl<'a> Consumer<'a> {
    fn new(model: &'a Model) -> Result<Self> {
        let prep = match model {
            Model::Gesture(m) => m.preprocess(),
            Model::Recon(m) => m.preprocess(),
        };
        Ok(Consumer { model, prep: prep.streamer()?, window: SlidingWindow::new() })
    }

    fn step(&mut self, frame: &Frame) -> Result<Prediction> {
        let x = self.prep.push(frame)?;
        Ok(match self.model {
            Model::Gesture(m) => Prediction::Gesture(argmax(&m.classify(&x)?)),
            Model::Recon(m) => {
                let (w, _) = self.window.push(frame.timestamp_ns, &x);
                Prediction::Pose(m.predict_windows(&[&w], Exec::Sequential)?.remove(0))
            }
        })
    }
}

struct Packet {
    ready: Instant,
    bytes: Vec<u8>,
}

/// Replays `frames` through the model. With `paced` set, frame `i` becomes
/// available at `i / fps` seconds after the start; otherwise as fast as the
/// consumer drains the queue. Latency runs from availability to prediction.
pub fn run_stream(model: &Model, frames: &[Frame], fps: f64, paced: bool) -> Result<(StreamStats, Vec<Prediction>)> {
    let (tx, rx) = sync_channel::<Packet>(QUEUE_FRAMES);
    let period = Duration::from_secs_f64(1.0 / fps);
    let channels = frames.first().map_or(0, |f| f.channels.len());
    let start = Instant::now();
    thread::scope(|s| {
        s.spawn(move || {
            for (i, f) in frames.iter().enumerate() {
                if paced {
                    let due = start + period * i as u32;
                    let now = Instant::now();
                    if due > now {
                        thread::sleep(due - now);
                    }
                }
                let packet = Packet { ready: Instant::now(), bytes: encode_stream_record(f) };
                if tx.send(packet).is_err() {
                    return;
                }
            }
        });
        consume(model, rx, channels, period, start)
    })
}

fn consume(
    model: &Model,
    rx: Receiver<Packet>,
    channels: usize,
    period: Duration,
    start: Instant,
) -> Result<(StreamStats, Vec<Prediction>)> {
    let mut consumer = Consumer::new(model)?;
    let mut latencies = Vec::new();
    let mut predictions = Vec::new();
    for packet in rx {
        let frame = read_stream_record(&mut packet.bytes.as_slice(), channels)?
            .ok_or_else(|| PipelineError::Protocol("empty packet".into()))?;
        let p = consumer.step(&frame)?;
        latencies.push(packet.ready.elapsed().as_secs_f64() * 1e3);
        predictions.push(p);
    }
    let stats = StreamStats::from_latencies(latencies, period.as_secs_f64() * 1e3, start.elapsed().as_secs_f64());
    Ok((stats, predictions))
}

/// Replays the configured dataset (or its first `max_frames` frames).
pub fn stream(cfg: &PipelineConfig) -> Result<(StreamStats, Vec<Prediction>)> {
    let model = Model::load(cfg)?;
    let frames = load_task_dataset(cfg)?;
    let n = match cfg.stream.max_frames {
        0 => frames.len(),
        m => m.min(frames.len()),
    };
    run_stream(&model, &frames[..n], cfg.fps, cfg.stream.paced)
}

/// The same predictions computed over the whole recording at once.
pub fn batch_predictions(model: &Model, frames: &[Frame]) -> Result<Vec<Prediction>> {
    Ok(match model {
        Model::Gesture(m) => m.predict_frames(frames, Exec::default())?.into_iter().map(Prediction::Gesture).collect(),
        Model::Recon(m) => m.predict_frames(frames, Exec::default())?.into_iter().map(Prediction::Pose).collect(),
    })
}
