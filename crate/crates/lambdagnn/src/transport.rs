use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::thread::{self, JoinHandle};

use lambdagnn_core::serverless::{
    decode_header, decode_message, encode_message, Message, Transport, TransportError, HEADER_LEN,
};

fn io_err(e: io::Error) -> TransportError {
    TransportError::Io(e.to_string())
}

fn read_frame(stream: &mut TcpStream) -> Result<Option<Vec<u8>>, TransportError> {
    let mut frame = vec![0u8; HEADER_LEN];
    match stream.read_exact(&mut frame) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(io_err(e)),
    }
    let header = decode_header(&frame)?;
    let len = usize::try_from(header.payload_len)
        .map_err(|_| TransportError::Io("frame too large".into()))?;
    frame.resize(HEADER_LEN + len, 0);
    stream
        .read_exact(&mut frame[HEADER_LEN..])
        .map_err(io_err)?;
    Ok(Some(frame))
}

/// Decodes every frame arriving on `stream` and sends back what it decoded.
fn inbox(mut stream: TcpStream) -> Result<(), TransportError> {
    while let Some(frame) = read_frame(&mut stream)? {
        let (msg, _) = decode_message(&frame)?;
        stream.write_all(&encode_message(&msg)).map_err(io_err)?;
    }
    Ok(())
}

/// Starts an inbox on `listener`; it serves one connection until EOF.
pub fn spawn_inbox(listener: TcpListener) -> JoinHandle<Result<(), TransportError>> {
    thread::spawn(move || {
        let (stream, _) = listener.accept().map_err(io_err)?;
        stream.set_nodelay(true).map_err(io_err)?;
        inbox(stream)
    })
}

/// One TCP connection per partition. `deliver` blocks until the peer has
/// decoded the frame and echoed it back.
pub struct TcpTransport {
    peers: Vec<TcpStream>,
    inboxes: Vec<JoinHandle<Result<(), TransportError>>>,
    frames: u64,
    bytes: u64,
}

impl TcpTransport {
    /// Starts one inbox thread per partition on 127.0.0.1.
    pub fn loopback(partitions: usize) -> io::Result<Self> {
        let mut addrs = Vec::with_capacity(partitions);
        let mut inboxes = Vec::with_capacity(partitions);
        for _ in 0..partitions {
            let l = TcpListener::bind("127.0.0.1:0")?;
            addrs.push(l.local_addr()?);
            inboxes.push(spawn_inbox(l));
        }
        let mut t = Self::connect(&addrs)?;
        t.inboxes = inboxes;
        Ok(t)
    }

    /// Connects to externally started inboxes, one address per partition.
    pub fn connect(addrs: &[SocketAddr]) -> io::Result<Self> {
        let peers = addrs
            .iter()
            .map(|a| {
                let s = TcpStream::connect(a)?;
                s.set_nodelay(true)?;
                Ok(s)
            })
            .collect::<io::Result<_>>()?;
        Ok(Self {
            peers,
            inboxes: Vec::new(),
            frames: 0,
            bytes: 0,
        })
    }
}

impl Transport for TcpTransport {
    fn deliver(&mut self, to: usize, msg: Message) -> Result<Message, TransportError> {
        let stream = self
            .peers
            .get_mut(to)
            .ok_or(TransportError::UnknownPeer(to))?;
        let frame = encode_message(&msg);
        stream.write_all(&frame).map_err(io_err)?;
        let reply = read_frame(stream)?.ok_or(TransportError::Closed)?;
        let (got, _) = decode_message(&reply)?;
        self.frames += 1;
        self.bytes += frame.len() as u64;
        Ok(got)
    }

    fn stats(&self) -> (u64, u64) {
        (self.frames, self.bytes)
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        for p in &self.peers {
            let _ = p.shutdown(Shutdown::Write);
        }
        for h in self.inboxes.drain(..) {
            let _ = h.join();
        }
    }
}
