//! Binary frame format shared by the proxies, the directory and the address
//! reflector. All integers are big-endian.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "FGFT"
//!      4     1  version (1)
//!      5     1  message type
//!      6     2  flags (bit 0: forwarded by a gateway)
//!      8    32  connection id
//!     40    16  request id
//!     56    32  service id
//!     88     4  payload length
//!     92     n  payload
//! ```

use std::fmt;

use bytes::{BufMut, Bytes, BytesMut};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::discovery::{ConnectionId, PeerGuid, ServiceId};

pub const MAGIC: [u8; 4] = *b"FGFT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 92;
/// Largest payload a single frame may carry. There is no fragmentation.
pub const MAX_PAYLOAD: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    UnknownMessageType(u8),
    #[error("truncated frame: {0} bytes")]
    Truncated(usize),
    #[error("payload length {declared} does not match {actual} bytes present")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("payload of {0} bytes exceeds the frame limit")]
    PayloadTooLarge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum MsgType {
    Request = 1,
    Response = 2,
    Heartbeat = 3,
    Advertise = 4,
    Lookup = 5,
    LookupReply = 6,
    AddrReflect = 7,
    AddrReply = 8,
    DisconnectReport = 9,
}

impl MsgType {
    pub const ALL: [MsgType; 9] = [
        Self::Request,
        Self::Response,
        Self::Heartbeat,
        Self::Advertise,
        Self::Lookup,
        Self::LookupReply,
        Self::AddrReflect,
        Self::AddrReply,
        Self::DisconnectReport,
    ];
}

impl TryFrom<u8> for MsgType {
    type Error = WireError;

    fn try_from(v: u8) -> Result<Self, WireError> {
        Self::ALL
            .get(usize::from(v).wrapping_sub(1))
            .copied()
            .ok_or(WireError::UnknownMessageType(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Flags(pub u16);

impl Flags {
    pub const GATEWAY_FORWARDED: u16 = 1;

    pub fn forwarded(self) -> bool {
        self.0 & Self::GATEWAY_FORWARDED != 0
    }

    pub fn with_forwarded(self) -> Self {
        Self(self.0 | Self::GATEWAY_FORWARDED)
    }
}

/// Per-request identifier, unique within one client's lifetime.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct RequestId(pub [u8; 16]);

impl RequestId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RequestId({})", self.to_hex())
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// First 16 bytes of `SHA-256(client_guid || sequence_be)`.
pub fn new_request_id(client: &PeerGuid, sequence: u64) -> RequestId {
    let mut hasher = Sha256::new();
    hasher.update(client.as_bytes());
    hasher.update(sequence.to_be_bytes());
    let digest = hasher.finalize();
    let mut id = [0u8; 16];
    id.copy_from_slice(&digest[..16]);
    RequestId(id)
}

/// One frame. The payload is a shared, immutable buffer, so cloning an
/// envelope or slicing it out of a received datagram never copies bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub msg_type: MsgType,
    pub flags: Flags,
    pub connection_id: ConnectionId,
    pub request_id: RequestId,
    pub service_id: ServiceId,
    pub payload: Bytes,
}

impl Envelope {
    pub fn new(msg_type: MsgType, connection_id: ConnectionId, request_id: RequestId, service_id: ServiceId, payload: Bytes) -> Self {
        Self {
            msg_type,
            flags: Flags::default(),
            connection_id,
            request_id,
            service_id,
            payload,
        }
    }

    /// A control frame with no connection or request identity.
    pub fn control(msg_type: MsgType, service_id: ServiceId, payload: Bytes) -> Self {
        Self::new(msg_type, ConnectionId::default(), RequestId::default(), service_id, payload)
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Result<Bytes, WireError> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(WireError::PayloadTooLarge(self.payload.len()));
        }
        let mut buf = BytesMut::with_capacity(self.encoded_len());
        buf.put_slice(&MAGIC);
        buf.put_u8(VERSION);
        buf.put_u8(self.msg_type as u8);
        buf.put_u16(self.flags.0);
        buf.put_slice(self.connection_id.as_bytes());
        buf.put_slice(&self.request_id.0);
        buf.put_slice(self.service_id.as_bytes());
        buf.put_u32(self.payload.len() as u32);
        buf.put_slice(&self.payload);
        Ok(buf.freeze())
    }

    /// Parses a frame; the payload is a slice of `frame`.
    pub fn decode(frame: Bytes) -> Result<Self, WireError> {
        if frame.len() < HEADER_LEN {
            // Report a wrong magic even on short input when it is visible.
            if frame.len() >= 4 && frame[..4] != MAGIC {
                return Err(WireError::BadMagic(frame[..4].try_into().unwrap()));
            }
            return Err(WireError::Truncated(frame.len()));
        }
        let magic: [u8; 4] = frame[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(WireError::BadMagic(magic));
        }
        if frame[4] != VERSION {
            return Err(WireError::BadVersion(frame[4]));
        }
        let msg_type = MsgType::try_from(frame[5])?;
        let flags = Flags(u16::from_be_bytes([frame[6], frame[7]]));
        let connection_id = ConnectionId(frame[8..40].try_into().unwrap());
        let request_id = RequestId(frame[40..56].try_into().unwrap());
        let service_id = ServiceId(frame[56..88].try_into().unwrap());
        let declared = u32::from_be_bytes(frame[88..92].try_into().unwrap()) as usize;
        let actual = frame.len() - HEADER_LEN;
        if declared > MAX_PAYLOAD {
            return Err(WireError::PayloadTooLarge(declared));
        }
        if declared != actual {
            if declared > actual {
                return Err(WireError::Truncated(frame.len()));
            }
            return Err(WireError::LengthMismatch { declared, actual });
        }
        Ok(Self {
            msg_type,
            flags,
            connection_id,
            request_id,
            service_id,
            payload: frame.slice(HEADER_LEN..),
        })
    }

    pub fn decode_slice(frame: &[u8]) -> Result<Self, WireError> {
        Self::decode(Bytes::copy_from_slice(frame))
    }

    /// The reply to a request: same identities, new payload.
    pub fn response(&self, payload: Bytes) -> Self {
        Self {
            msg_type: MsgType::Response,
            flags: Flags::default(),
            payload,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(msg_type: MsgType, payload: Vec<u8>) -> Envelope {
        Envelope::new(
            msg_type,
            ConnectionId([7; 32]),
            RequestId([9; 16]),
            ServiceId([3; 32]),
            Bytes::from(payload),
        )
    }

    #[test]
    fn empty_request_is_header_only() {
        let frame = sample(MsgType::Request, vec![]).encode().unwrap();
        assert_eq!(frame.len(), 4 + 1 + 1 + 2 + 32 + 16 + 32 + 4);
        assert_eq!(frame.len(), HEADER_LEN);
        assert_eq!(&frame[..6], b"FGFT\x01\x01");
        assert_eq!(&frame[88..92], &[0, 0, 0, 0]);
    }

    #[test]
    fn bit_exact_layout() {
        let mut e = sample(MsgType::Response, vec![0xAB, 0xCD]);
        e.flags = Flags(0x0001);
        let f = e.encode().unwrap();
        assert_eq!(&f[4..8], &[1, 2, 0, 1]);
        assert_eq!(&f[8..40], &[7; 32]);
        assert_eq!(&f[40..56], &[9; 16]);
        assert_eq!(&f[56..88], &[3; 32]);
        assert_eq!(&f[88..92], &[0, 0, 0, 2]);
        assert_eq!(&f[92..], &[0xAB, 0xCD]);
    }

    #[test]
    fn kib_response_round_trips() {
        let e = sample(MsgType::Response, (0..1024).map(|i| i as u8).collect());
        assert_eq!(Envelope::decode(e.encode().unwrap()).unwrap(), e);
    }

    #[test]
    fn rejects_malformed_frames() {
        let good = sample(MsgType::Request, vec![1, 2, 3]).encode().unwrap();

        let mut bad = good.to_vec();
        bad[..4].copy_from_slice(b"XXXX");
        assert_eq!(Envelope::decode_slice(&bad), Err(WireError::BadMagic(*b"XXXX")));

        let mut bad = good.to_vec();
        bad[4] = 2;
        assert_eq!(Envelope::decode_slice(&bad), Err(WireError::BadVersion(2)));

        let mut bad = good.to_vec();
        bad[5] = 0;
        assert_eq!(Envelope::decode_slice(&bad), Err(WireError::UnknownMessageType(0)));
        bad[5] = 10;
        assert_eq!(Envelope::decode_slice(&bad), Err(WireError::UnknownMessageType(10)));

        assert_eq!(Envelope::decode_slice(&good[..50]), Err(WireError::Truncated(50)));
        assert_eq!(Envelope::decode_slice(&good[..94]), Err(WireError::Truncated(94)));

        let mut long = good.to_vec();
        long.push(0);
        assert_eq!(
            Envelope::decode_slice(&long),
            Err(WireError::LengthMismatch { declared: 3, actual: 4 })
        );
    }

    #[test]
    fn oversize_payload_rejected() {
        let e = sample(MsgType::Request, vec![0; MAX_PAYLOAD + 1]);
        assert_eq!(e.encode(), Err(WireError::PayloadTooLarge(MAX_PAYLOAD + 1)));
        assert!(sample(MsgType::Request, vec![0; MAX_PAYLOAD]).encode().is_ok());
    }

    #[test]
    fn decoded_payload_shares_the_frame_buffer() {
        let frame = sample(MsgType::Response, vec![5; 100]).encode().unwrap();
        let base = frame.as_ptr();
        let e = Envelope::decode(frame).unwrap();
        assert_eq!(e.payload.as_ptr(), base.wrapping_add(HEADER_LEN));
    }

    #[test]
    fn request_id_golden_vectors() {
        let zero = PeerGuid([0; 32]);
        assert_eq!(new_request_id(&zero, 0).to_hex(), "2c34ce1df23b838c5abf2a7f6437cca3");
        assert_eq!(new_request_id(&zero, 1).to_hex(), "08e00266fff0aacc64974f22a53622a7");
        assert_eq!(new_request_id(&zero, 5), new_request_id(&zero, 5));
        assert_ne!(new_request_id(&zero, 0), new_request_id(&zero, 1));
    }

    #[test]
    fn flags_bit_zero_marks_forwarding() {
        assert!(!Flags::default().forwarded());
        assert!(Flags::default().with_forwarded().forwarded());
        assert_eq!(Flags(0x8000).with_forwarded(), Flags(0x8001));
    }

    proptest! {
        #[test]
        fn round_trip_all_types(
            ty in 0usize..9,
            flags in any::<u16>(),
            conn in any::<[u8; 32]>(),
            req in any::<[u8; 16]>(),
            svc in any::<[u8; 32]>(),
            payload in proptest::collection::vec(any::<u8>(), 0..2048),
        ) {
            let e = Envelope {
                msg_type: MsgType::ALL[ty],
                flags: Flags(flags),
                connection_id: ConnectionId(conn),
                request_id: RequestId(req),
                service_id: ServiceId(svc),
                payload: Bytes::from(payload),
            };
            let frame = e.encode().unwrap();
            prop_assert_eq!(frame.len(), e.encoded_len());
            prop_assert_eq!(Envelope::decode(frame).unwrap(), e);
        }

        #[test]
        fn any_strict_prefix_is_rejected(payload in proptest::collection::vec(any::<u8>(), 0..300), cut in 0usize..392) {
            let frame = sample(MsgType::Request, payload).encode().unwrap();
            prop_assume!(cut < frame.len());
            prop_assert!(Envelope::decode_slice(&frame[..cut]).is_err());
        }
    }
}
