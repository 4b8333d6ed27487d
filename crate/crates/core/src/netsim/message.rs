use serde::{Deserialize, Serialize};

use crate::crypto::{Digest, ReEncryptionKey};

/// Opaque node address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageKind {
    StoreBlob,
    FetchBlob,
    BlobReply,
    ReencryptAndForward,
    TransferBlob,
    SafeChannel,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::StoreBlob => "STORE_BLOB",
            MessageKind::FetchBlob => "FETCH_BLOB",
            MessageKind::BlobReply => "BLOB_REPLY",
            MessageKind::ReencryptAndForward => "REENCRYPT_AND_FORWARD",
            MessageKind::TransferBlob => "TRANSFER_BLOB",
            MessageKind::SafeChannel => "SAFE_CHANNEL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplyStatus {
    Found(Vec<u8>),
    NotFound,
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    StoreBlob {
        blob_id: Digest,
        blob: Vec<u8>,
    },
    FetchBlob {
        blob_id: Digest,
    },
    BlobReply {
        blob_id: Digest,
        status: ReplyStatus,
    },
    ReencryptAndForward {
        blob_id: Digest,
        rk: ReEncryptionKey,
        dest: NodeId,
    },
    TransferBlob {
        blob_id: Digest,
        blob: Vec<u8>,
    },
    /// Bytes wrapped to the recipient's public key.
    SafeChannel {
        sealed: Vec<u8>,
    },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::StoreBlob { .. } => MessageKind::StoreBlob,
            Payload::FetchBlob { .. } => MessageKind::FetchBlob,
            Payload::BlobReply { .. } => MessageKind::BlobReply,
            Payload::ReencryptAndForward { .. } => MessageKind::ReencryptAndForward,
            Payload::TransferBlob { .. } => MessageKind::TransferBlob,
            Payload::SafeChannel { .. } => MessageKind::SafeChannel,
        }
    }

    pub fn blob_id(&self) -> Option<&Digest> {
        match self {
            Payload::StoreBlob { blob_id, .. }
            | Payload::FetchBlob { blob_id }
            | Payload::BlobReply { blob_id, .. }
            | Payload::ReencryptAndForward { blob_id, .. }
            | Payload::TransferBlob { blob_id, .. } => Some(blob_id),
            Payload::SafeChannel { .. } => None,
        }
    }

    /// Node identifiers carried inside the payload.
    pub fn node_ids(&self) -> Vec<NodeId> {
        match self {
            Payload::ReencryptAndForward { dest, .. } => vec![*dest],
            _ => Vec::new(),
        }
    }

    /// Wire encoding: kind tag followed by fields. Used for payload digests
    /// and byte-level secrecy scans.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.kind() as u8];
        match self {
            Payload::StoreBlob { blob_id, blob } | Payload::TransferBlob { blob_id, blob } => {
                out.extend_from_slice(blob_id.as_bytes());
                out.extend_from_slice(blob);
            }
            Payload::FetchBlob { blob_id } => out.extend_from_slice(blob_id.as_bytes()),
            Payload::BlobReply { blob_id, status } => {
                out.extend_from_slice(blob_id.as_bytes());
                match status {
                    ReplyStatus::Found(blob) => {
                        out.push(0);
                        out.extend_from_slice(blob);
                    }
                    ReplyStatus::NotFound => out.push(1),
                    ReplyStatus::Rejected(reason) => {
                        out.push(2);
                        out.extend_from_slice(reason.as_bytes());
                    }
                }
            }
            Payload::ReencryptAndForward { blob_id, rk, dest } => {
                out.extend_from_slice(blob_id.as_bytes());
                out.extend_from_slice(&dest.0.to_be_bytes());
                out.extend_from_slice(&rk.to_bytes());
            }
            Payload::SafeChannel { sealed } => out.extend_from_slice(sealed),
        }
        out
    }
}

/// A message as seen by its recipient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    /// Sender identity revealed to the recipient; `None` for anonymous delivery.
    pub from_visible: Option<NodeId>,
    pub to: NodeId,
    pub payload: Payload,
}

impl Message {
    pub fn from(sender: NodeId, to: NodeId, payload: Payload) -> Self {
        Self {
            from_visible: Some(sender),
            to,
            payload,
        }
    }

    pub fn anonymous(to: NodeId, payload: Payload) -> Self {
        Self {
            from_visible: None,
            to,
            payload,
        }
    }

    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    /// Every node identity a recipient can read off this message.
    pub fn mentioned_nodes(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self.from_visible.into_iter().collect();
        ids.extend(self.payload.node_ids());
        ids
    }
}
