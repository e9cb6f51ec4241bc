//! Length-delimited framing over a byte stream.

use thiserror::Error;
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

use super::frame::{Frame, FrameError, CRC_LEN, HEADER_LEN, MAX_PAYLOAD};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Reads one frame. `Ok(None)` means the peer closed the stream between
/// frames; closing inside a frame is [`FrameError::Truncated`].
pub async fn read_frame<R: AsyncRead + Unpin>(r: &mut R) -> Result<Option<Frame>, TransportError> {
    let mut buf = vec![0u8; HEADER_LEN];
    let first = r.read(&mut buf[..1]).await?;
    if first == 0 {
        return Ok(None);
    }
    read_full(r, &mut buf[1..], 1).await?;
    let declared = usize::from(u16::from_be_bytes([buf[2], buf[3]]));
    if declared > MAX_PAYLOAD {
        return Err(FrameError::Oversize(declared).into());
    }
    buf.resize(HEADER_LEN + declared + CRC_LEN, 0);
    read_full(r, &mut buf[HEADER_LEN..], HEADER_LEN).await?;
    Ok(Some(Frame::decode(&buf)?))
}

async fn read_full<R: AsyncRead + Unpin>(
    r: &mut R,
    dst: &mut [u8],
    already: usize,
) -> Result<(), TransportError> {
    let mut filled = 0;
    while filled < dst.len() {
        let n = r.read(&mut dst[filled..]).await?;
        if n == 0 {
            return Err(FrameError::Truncated {
                needed: already + dst.len(),
                got: already + filled,
            }
            .into());
        }
        filled += n;
    }
    Ok(())
}

pub async fn write_frame<W: AsyncWrite + Unpin>(
    w: &mut W,
    f: &Frame,
) -> Result<(), TransportError> {
    write_raw(w, &f.encode()?).await
}

pub async fn write_raw<W: AsyncWrite + Unpin>(
    w: &mut W,
    bytes: &[u8],
) -> Result<(), TransportError> {
    w.write_all(bytes).await?;
    w.flush().await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::frame::FunctionCode;

    #[tokio::test]
    async fn stream_roundtrip_and_truncation() {
        let a = Frame::new(2, FunctionCode::ReadTelemetry, vec![]);
        let b = Frame::new(3, FunctionCode::WriteDayPlan, vec![9; 18]);
        let mut bytes = a.encode().unwrap();
        bytes.extend(b.encode().unwrap());
        let mut r = bytes.as_slice();
        assert_eq!(read_frame(&mut r).await.unwrap(), Some(a));
        assert_eq!(read_frame(&mut r).await.unwrap(), Some(b.clone()));
        assert!(read_frame(&mut r).await.unwrap().is_none());

        let enc = b.encode().unwrap();
        let mut cut = &enc[..10];
        match read_frame(&mut cut).await {
            Err(TransportError::Frame(FrameError::Truncated {
                needed: 24,
                got: 10,
            })) => {}
            other => panic!("{other:?}"),
        }
    }
}
