//! Simulated BLE channel: ordered, framed, bidirectional delivery with a
//! parameterized bandwidth/latency clock model and an interception hook.
//!
//! The channel is in-process with a simulated clock. Frame wire layout,
//! normative for the optional TCP loopback mode:
//! 4-octet big-endian payload length || 1-octet kind || payload.

use crate::error::{Error, Result};
use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

/// Hard cap on frame payload size.
pub const MAX_PAYLOAD: usize = 16 * 1024 * 1024;

/// Typed protocol messages on the simulated channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameKind {
    PairReq = 1,
    PairRsp = 2,
    PairConfirm = 3,
    PairRandom = 4,
    KeyDist = 5,
    StegoImage = 6,
    PlaintextUnlock = 7,
    SignedData = 8,
    UnlockResult = 9,
}

impl FrameKind {
    pub fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => FrameKind::PairReq,
            2 => FrameKind::PairRsp,
            3 => FrameKind::PairConfirm,
            4 => FrameKind::PairRandom,
            5 => FrameKind::KeyDist,
            6 => FrameKind::StegoImage,
            7 => FrameKind::PlaintextUnlock,
            8 => FrameKind::SignedData,
            9 => FrameKind::UnlockResult,
            other => return Err(Error::InvalidInput(format!("unknown frame kind {other}"))),
        })
    }
}

/// A typed, length-prefixed protocol message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: FrameKind, payload: Vec<u8>) -> Result<Self> {
        if payload.len() > MAX_PAYLOAD {
            return Err(Error::Capacity {
                required: payload.len(),
                available: MAX_PAYLOAD,
            });
        }
        Ok(Frame { kind, payload })
    }

    /// Size on the wire, in bytes.
    pub fn wire_len(&self) -> usize {
        4 + 1 + self.payload.len()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&(self.payload.len() as u32).to_be_bytes())?;
        w.write_all(&[self.kind as u8])?;
        w.write_all(&self.payload)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut header = [0u8; 5];
        r.read_exact(&mut header).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Disconnected
            } else {
                Error::Io(e)
            }
        })?;
        let len = u32::from_be_bytes(header[0..4].try_into().unwrap()) as usize;
        if len > MAX_PAYLOAD {
            return Err(Error::InvalidInput(format!("frame length {len} too large")));
        }
        let kind = FrameKind::from_u8(header[4])?;
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)?;
        Frame::new(kind, payload)
    }
}

/// Channel time model: each delivered frame costs
/// `latency_s + wire_kb / bandwidth_kbps` simulated seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// Kilobytes (1000 bytes) per second.
    pub bandwidth_kbps: f64,
    /// Fixed per-message overhead, seconds.
    pub latency_s: f64,
    pub seed: u64,
}

impl ChannelModel {
    pub fn new(bandwidth_kbps: f64, latency_s: f64, seed: u64) -> Result<Self> {
        if bandwidth_kbps.is_nan() || bandwidth_kbps <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "bandwidth must be positive, got {bandwidth_kbps}"
            )));
        }
        if latency_s.is_nan() || latency_s < 0.0 {
            return Err(Error::InvalidInput(format!(
                "latency must be non-negative, got {latency_s}"
            )));
        }
        Ok(ChannelModel {
            bandwidth_kbps,
            latency_s,
            seed,
        })
    }

    /// Modeled transfer time for a message of `size_kb` kilobytes.
    pub fn transfer_time(&self, size_kb: f64) -> f64 {
        self.latency_s + size_kb / self.bandwidth_kbps
    }

    /// Parse a key=value config file with keys bandwidth_kbps, latency_s, seed.
    pub fn from_config(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_config(&text)
    }

    pub fn parse_config(text: &str) -> Result<Self> {
        let mut bandwidth = None;
        let mut latency = None;
        let mut seed = 0u64;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("config line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad =
                |e: &dyn std::fmt::Display| Error::InvalidInput(format!("config key {key}: {e}"));
            match key {
                "bandwidth_kbps" => bandwidth = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                "latency_s" => latency = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                "seed" => seed = value.parse::<u64>().map_err(|e| bad(&e))?,
                other => {
                    return Err(Error::InvalidInput(format!("unknown config key {other}")));
                }
            }
        }
        let bandwidth =
            bandwidth.ok_or_else(|| Error::InvalidInput("missing bandwidth_kbps".into()))?;
        let latency = latency.ok_or_else(|| Error::InvalidInput("missing latency_s".into()))?;
        ChannelModel::new(bandwidth, latency, seed)
    }
}

impl Default for ChannelModel {
    fn default() -> Self {
        // Defaults come from the least-squares calibration the bench module
        // computes over the reference timing table.
        ChannelModel {
            bandwidth_kbps: 10.653,
            latency_s: 24.674,
            seed: 0,
        }
    }
}

/// Direction of travel through the channel, from the perspective of the
/// two endpoints A (client/initiator side) and B (controller/responder side).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AtoB,
    BtoA,
}

/// What an interceptor decides to do with a frame in flight.
pub enum Intercept {
    /// Deliver as given (possibly modified).
    Forward(Frame),
    /// Silently swallow the frame.
    Drop,
    /// Deliver this sequence instead, in order.
    Replace(Vec<Frame>),
}

/// Adversary hook: sees every frame in both directions before delivery.
pub trait Interceptor: Send {
    fn on_frame(&mut self, direction: Direction, frame: Frame) -> Intercept;
}

/// Pass-through interceptor; behavior is identical to no hook at all.
pub struct IdentityInterceptor;

impl Interceptor for IdentityInterceptor {
    fn on_frame(&mut self, _direction: Direction, frame: Frame) -> Intercept {
        Intercept::Forward(frame)
    }
}

struct ChannelState {
    a_to_b: VecDeque<Frame>,
    b_to_a: VecDeque<Frame>,
    clock_s: f64,
    model: ChannelModel,
    interceptor: Option<Box<dyn Interceptor>>,
    open: bool,
}

/// One end of a simulated channel. Create both with [`Channel::pair`].
pub struct Endpoint {
    side: Direction,
    state: Arc<Mutex<ChannelState>>,
}

/// Factory for in-process channel pairs.
pub struct Channel;

impl Channel {
    /// Two connected endpoints sharing one simulated clock.
    pub fn pair(model: ChannelModel) -> (Endpoint, Endpoint) {
        let state = Arc::new(Mutex::new(ChannelState {
            a_to_b: VecDeque::new(),
            b_to_a: VecDeque::new(),
            clock_s: 0.0,
            model,
            interceptor: None,
            open: true,
        }));
        (
            Endpoint {
                side: Direction::AtoB,
                state: Arc::clone(&state),
            },
            Endpoint {
                side: Direction::BtoA,
                state,
            },
        )
    }
}

impl Endpoint {
    /// Queue a frame for the peer. The interceptor, if any, runs here.
    pub fn send(&self, frame: Frame) -> Result<()> {
        let mut st = self.state.lock().unwrap();
        if !st.open {
            return Err(Error::Disconnected);
        }
        let direction = self.side;
        let outcome = match st.interceptor.as_mut() {
            Some(hook) => hook.on_frame(direction, frame),
            None => Intercept::Forward(frame),
        };
        let queue = match direction {
            Direction::AtoB => &mut st.a_to_b,
            Direction::BtoA => &mut st.b_to_a,
        };
        match outcome {
            Intercept::Forward(f) => queue.push_back(f),
            Intercept::Drop => {}
            Intercept::Replace(frames) => queue.extend(frames),
        }
        Ok(())
    }

    fn try_pop(&self) -> (Option<Frame>, bool) {
        let mut st = self.state.lock().unwrap();
        let queue = match self.side {
            Direction::AtoB => &mut st.b_to_a,
            Direction::BtoA => &mut st.a_to_b,
        };
        match queue.pop_front() {
            Some(frame) => {
                let cost = st.model.transfer_time(frame.wire_len() as f64 / 1000.0);
                st.clock_s += cost;
                (Some(frame), st.open)
            }
            None => (None, st.open),
        }
    }

    /// Pop the next frame addressed to this endpoint, advancing the
    /// simulated clock by the model's cost for its wire size. Returns
    /// `Disconnected` when nothing is pending (the simulation has no
    /// blocking waits) or the channel is closed.
    pub fn recv(&self) -> Result<Frame> {
        self.try_pop().0.ok_or(Error::Disconnected)
    }

    /// Like [`recv`](Self::recv), but spins until a frame arrives, the
    /// channel closes, or the wall-clock timeout expires. For endpoints
    /// driven from separate threads.
    pub fn recv_wait(&self, timeout: std::time::Duration) -> Result<Frame> {
        let deadline = std::time::Instant::now() + timeout;
        loop {
            match self.try_pop() {
                (Some(frame), _) => return Ok(frame),
                (None, false) => return Err(Error::Disconnected),
                (None, true) => {
                    if std::time::Instant::now() >= deadline {
                        return Err(Error::Disconnected);
                    }
                    std::thread::yield_now();
                }
            }
        }
    }

    /// Install the adversary hook for both directions.
    pub fn attach_interceptor(&self, hook: Box<dyn Interceptor>) {
        self.state.lock().unwrap().interceptor = Some(hook);
    }

    pub fn detach_interceptor(&self) -> Option<Box<dyn Interceptor>> {
        self.state.lock().unwrap().interceptor.take()
    }

    /// Current simulated time in seconds.
    pub fn clock_s(&self) -> f64 {
        self.state.lock().unwrap().clock_s
    }

    pub fn model(&self) -> ChannelModel {
        self.state.lock().unwrap().model
    }

    pub fn close(&self) {
        self.state.lock().unwrap().open = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ChannelModel {
        ChannelModel::new(10.0, 0.5, 1).unwrap()
    }

    fn frame(kind: FrameKind, payload: &[u8]) -> Frame {
        Frame::new(kind, payload.to_vec()).unwrap()
    }

    #[test]
    fn identity_channel_delivers_bit_exact_fifo() {
        let (a, b) = Channel::pair(model());
        let f1 = frame(FrameKind::PairReq, b"one");
        let f2 = frame(FrameKind::PairRsp, b"two");
        a.send(f1.clone()).unwrap();
        a.send(f2.clone()).unwrap();
        assert_eq!(b.recv().unwrap(), f1);
        assert_eq!(b.recv().unwrap(), f2);
    }

    #[test]
    fn transfer_time_closed_form() {
        let m = ChannelModel::new(10.0, 2.0, 0).unwrap();
        assert_eq!(m.transfer_time(0.0), 2.0);
        assert!((m.transfer_time(43.0) - (2.0 + 4.3)).abs() < 1e-12);
        // Doubling size exactly doubles time minus latency.
        let t1 = m.transfer_time(100.0) - m.latency_s;
        let t2 = m.transfer_time(200.0) - m.latency_s;
        assert!((t2 - 2.0 * t1).abs() < 1e-9);
    }

    #[test]
    fn clock_advances_per_delivery() {
        let (a, b) = Channel::pair(ChannelModel::new(1.0, 0.25, 0).unwrap());
        let f = frame(FrameKind::SignedData, &[0u8; 995]); // wire = 1000 bytes
        a.send(f).unwrap();
        assert_eq!(b.clock_s(), 0.0);
        b.recv().unwrap();
        assert!((b.clock_s() - (0.25 + 1.0)).abs() < 1e-9);
    }

    #[test]
    fn recv_after_close_disconnects() {
        let (a, b) = Channel::pair(model());
        a.close();
        assert!(matches!(b.recv(), Err(Error::Disconnected)));
        assert!(matches!(
            a.send(frame(FrameKind::PairReq, b"")),
            Err(Error::Disconnected)
        ));
    }

    #[test]
    fn identity_interceptor_is_transparent() {
        let (a, b) = Channel::pair(model());
        a.attach_interceptor(Box::new(IdentityInterceptor));
        let f = frame(FrameKind::StegoImage, b"payload");
        a.send(f.clone()).unwrap();
        assert_eq!(b.recv().unwrap(), f);
    }

    #[test]
    fn drop_all_starves_receiver() {
        struct DropAll;
        impl Interceptor for DropAll {
            fn on_frame(&mut self, _d: Direction, _f: Frame) -> Intercept {
                Intercept::Drop
            }
        }
        let (a, b) = Channel::pair(model());
        a.attach_interceptor(Box::new(DropAll));
        a.send(frame(FrameKind::PlaintextUnlock, b"open")).unwrap();
        assert!(matches!(b.recv(), Err(Error::Disconnected)));
    }

    #[test]
    fn inject_adds_one_frame_in_position() {
        struct InjectAfter;
        impl Interceptor for InjectAfter {
            fn on_frame(&mut self, _d: Direction, f: Frame) -> Intercept {
                let extra = Frame::new(FrameKind::SignedData, b"injected".to_vec()).unwrap();
                Intercept::Replace(vec![f, extra])
            }
        }
        let (a, b) = Channel::pair(model());
        a.attach_interceptor(Box::new(InjectAfter));
        let f = frame(FrameKind::PairReq, b"real");
        a.send(f.clone()).unwrap();
        assert_eq!(b.recv().unwrap(), f);
        let injected = b.recv().unwrap();
        assert_eq!(injected.kind, FrameKind::SignedData);
        assert_eq!(injected.payload, b"injected");
        assert!(b.recv().is_err());
    }

    #[test]
    fn frame_wire_round_trip() {
        let f = frame(FrameKind::KeyDist, b"\x00\x01\xff");
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), f.wire_len());
        assert_eq!(Frame::read_from(&mut &buf[..]).unwrap(), f);
    }

    #[test]
    fn frame_rejects_unknown_kind() {
        let buf = [0u8, 0, 0, 0, 42];
        assert!(matches!(
            Frame::read_from(&mut &buf[..]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn config_parsing() {
        let m =
            ChannelModel::parse_config("# comment\nbandwidth_kbps = 10.65\nlatency_s=24.7\nseed=9")
                .unwrap();
        assert!((m.bandwidth_kbps - 10.65).abs() < 1e-12);
        assert!((m.latency_s - 24.7).abs() < 1e-12);
        assert_eq!(m.seed, 9);
        assert!(ChannelModel::parse_config("latency_s=1").is_err());
        assert!(ChannelModel::parse_config("bandwidth_kbps=0\nlatency_s=1").is_err());
        assert!(ChannelModel::parse_config("bandwidth_kbps=1\nlatency_s=1\nbogus=2").is_err());
    }

    #[test]
    fn determinism_same_inputs_same_clock() {
        let run = || {
            let (a, b) = Channel::pair(model());
            for i in 0..10u8 {
                a.send(frame(FrameKind::SignedData, &vec![i; i as usize * 10]))
                    .unwrap();
            }
            let mut total = 0usize;
            while let Ok(f) = b.recv() {
                total += f.payload.len();
            }
            (b.clock_s(), total)
        };
        assert_eq!(run(), run());
    }
}
