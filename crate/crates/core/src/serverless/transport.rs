use super::{Message, TransportError};

/// Carries framed messages between roles.
///
/// Delivery is synchronous from the caller's point of view: the returned
/// message is what the receiving endpoint decoded. The discrete-event engine
/// decides *when* it arrives; the transport only decides *what* arrives.
pub trait Transport {
    fn deliver(&mut self, to: usize, msg: Message) -> Result<Message, TransportError>;

    /// Frames and bytes moved so far.
    fn stats(&self) -> (u64, u64) {
        (0, 0)
    }
}

/// Hands messages over in memory, unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct InProcess {
    frames: u64,
    bytes: u64,
}

impl Transport for InProcess {
    fn deliver(&mut self, _to: usize, msg: Message) -> Result<Message, TransportError> {
        self.frames += 1;
        self.bytes += (super::HEADER_LEN + msg.payload.len() * 4) as u64;
        Ok(msg)
    }

    fn stats(&self) -> (u64, u64) {
        (self.frames, self.bytes)
    }
}
