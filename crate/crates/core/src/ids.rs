//! Identifier newtypes shared across the crate.

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

id_type!(
    /// A player's unique id (UUID string in stored documents).
    PlayerId
);
id_type!(
    /// An image tile's unique id.
    ImageId
);
id_type!(
    /// A monitored region's unique id.
    RegionId
);
id_type!(
    /// A generated task's unique id.
    TaskId
);

/// Formats 16 random bytes as a canonical uppercase UUID (version 4,
/// RFC 4122 variant), matching the id style of the stored documents.
pub fn uuid_from_bytes(mut bytes: [u8; 16]) -> String {
    bytes[6] = (bytes[6] & 0x0f) | 0x40;
    bytes[8] = (bytes[8] & 0x3f) | 0x80;
    let u = uuid::Uuid::from_bytes(bytes);
    let mut buf = [0u8; uuid::fmt::Hyphenated::LENGTH];
    u.hyphenated().encode_upper(&mut buf).to_owned()
}
