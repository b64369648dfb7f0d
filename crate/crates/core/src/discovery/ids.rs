use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

macro_rules! id32 {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; 32]);

        impl $name {
            pub const fn from_bytes(bytes: [u8; 32]) -> Self {
                Self(bytes)
            }

            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }

            /// SHA-256 of a human-readable label, for configuration-assigned
            /// identities.
            pub fn from_label(label: &str) -> Self {
                Self(Sha256::digest(label.as_bytes()).into())
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({}..)", stringify!($name), &self.to_hex()[..12])
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                let raw = hex::decode(s).map_err(|e| format!("invalid hex id: {e}"))?;
                let bytes: [u8; 32] = raw.try_into().map_err(|v: Vec<u8>| format!("id must be 32 bytes, got {}", v.len()))?;
                Ok(Self(bytes))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

id32!(
    /// Stable logical identity of one proxy. A relaunched replica reuses the
    /// guid of the replica it replaces.
    PeerGuid
);

id32!(
    /// Identity of a replicated service.
    ServiceId
);

id32!(
    /// Identifier shared by both ends of a logical connection.
    ConnectionId
);

impl ConnectionId {
    /// `SHA-256(min(a, b) || max(a, b) || service)`: symmetric in the peer
    /// order and reproducible by either side after a restart.
    pub fn derive(a: &PeerGuid, b: &PeerGuid, service: &ServiceId) -> Self {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut hasher = Sha256::new();
        hasher.update(lo.0);
        hasher.update(hi.0);
        hasher.update(service.0);
        Self(hasher.finalize().into())
    }

    /// Connection between a client and a replicated service as a whole,
    /// carried in the header of every replicated request frame.
    pub fn session(client: &PeerGuid, service: &ServiceId) -> Self {
        Self::derive(client, &PeerGuid(service.0), service)
    }
}

/// Free-function form of [`ConnectionId::derive`].
pub fn connection_id(a: &PeerGuid, b: &PeerGuid, service: &ServiceId) -> ConnectionId {
    ConnectionId::derive(a, b, service)
}
