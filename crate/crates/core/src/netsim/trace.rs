use std::collections::BTreeSet;

use serde_json::{json, Map, Value};

use super::message::{Message, MessageKind, NodeId, Payload, ReplyStatus};
use crate::crypto::{hash, Digest};

/// One delivered message. `origin` is the simulator's ground truth and is
/// never shown to the recipient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub seq: u64,
    pub time: u64,
    pub origin: NodeId,
    pub message: Message,
}

impl Delivery {
    pub fn kind(&self) -> MessageKind {
        self.message.kind()
    }

    pub fn to(&self) -> NodeId {
        self.message.to
    }

    pub fn payload_digest(&self) -> Digest {
        hash(&self.message.payload.encode())
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("seq".into(), json!(self.seq));
        obj.insert("time".into(), json!(self.time));
        obj.insert("kind".into(), json!(self.kind().as_str()));
        obj.insert("to".into(), json!(self.message.to));
        if let Some(from) = self.message.from_visible {
            obj.insert("from_visible".into(), json!(from));
        }
        let encoded = self.message.payload.encode();
        obj.insert("payload_digest".into(), json!(hash(&encoded).to_hex()));
        obj.insert("payload_len".into(), json!(encoded.len()));
        if let Some(id) = self.message.payload.blob_id() {
            obj.insert("blob_id".into(), json!(id.to_hex()));
        }
        match &self.message.payload {
            Payload::ReencryptAndForward { rk, dest, .. } => {
                obj.insert("dest".into(), json!(dest));
                obj.insert("pads".into(), json!(rk.pads().len()));
            }
            Payload::BlobReply { status, .. } => {
                let s = match status {
                    ReplyStatus::Found(_) => "found".to_string(),
                    ReplyStatus::NotFound => "not_found".to_string(),
                    ReplyStatus::Rejected(r) => format!("rejected: {r}"),
                };
                obj.insert("status".into(), json!(s));
            }
            _ => {}
        }
        Value::Object(obj)
    }
}

/// A post or reply that could not be routed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingFailure {
    pub time: u64,
    pub origin: NodeId,
    pub to: NodeId,
    pub kind: MessageKind,
    pub reason: String,
}

/// Something a node learned outside of plain message contents, e.g. by
/// opening an envelope addressed to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Knowledge {
    Node(NodeId),
    OriginalKey { file_id: Digest },
    SharedKey { file_id: Digest },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub time: u64,
    pub node: NodeId,
    pub item: Knowledge,
}

/// What one node could know from its own deliveries and annotations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeKnowledge {
    pub nodes: BTreeSet<NodeId>,
    /// Blob ids whose bytes this node received.
    pub blobs: BTreeSet<Digest>,
    /// Blob ids this node received a re-encryption key for.
    pub rekeys_for: BTreeSet<Digest>,
    pub original_keys: BTreeSet<Digest>,
    pub shared_keys: BTreeSet<Digest>,
}

/// Append-only log of every delivery, routing failure and annotation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    deliveries: Vec<Delivery>,
    failures: Vec<RoutingFailure>,
    annotations: Vec<Annotation>,
}

impl Trace {
    pub(super) fn record(&mut self, d: Delivery) {
        self.deliveries.push(d);
    }

    pub(super) fn record_failure(&mut self, f: RoutingFailure) {
        self.failures.push(f);
    }

    pub(super) fn annotate(&mut self, a: Annotation) {
        self.annotations.push(a);
    }

    pub fn deliveries(&self) -> &[Delivery] {
        &self.deliveries
    }

    pub fn failures(&self) -> &[RoutingFailure] {
        &self.failures
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn is_empty(&self) -> bool {
        self.deliveries.is_empty() && self.failures.is_empty() && self.annotations.is_empty()
    }

    pub fn query<P: Fn(&Delivery) -> bool>(&self, predicate: P) -> Vec<&Delivery> {
        self.deliveries.iter().filter(|d| predicate(d)).collect()
    }

    pub fn deliveries_to(&self, node: NodeId) -> impl Iterator<Item = &Delivery> {
        self.deliveries.iter().filter(move |d| d.message.to == node)
    }

    pub fn knowledge_of(&self, node: NodeId) -> NodeKnowledge {
        let mut k = NodeKnowledge::default();
        for d in self.deliveries_to(node) {
            k.nodes.extend(d.message.mentioned_nodes());
            match &d.message.payload {
                Payload::StoreBlob { blob_id, .. }
                | Payload::TransferBlob { blob_id, .. }
                | Payload::BlobReply {
                    blob_id,
                    status: ReplyStatus::Found(_),
                } => {
                    k.blobs.insert(*blob_id);
                }
                Payload::ReencryptAndForward { blob_id, .. } => {
                    k.rekeys_for.insert(*blob_id);
                }
                _ => {}
            }
        }
        for a in self.annotations.iter().filter(|a| a.node == node) {
            match a.item {
                Knowledge::Node(n) => {
                    k.nodes.insert(n);
                }
                Knowledge::OriginalKey { file_id } => {
                    k.original_keys.insert(file_id);
                }
                Knowledge::SharedKey { file_id } => {
                    k.shared_keys.insert(file_id);
                }
            }
        }
        k
    }

    /// One JSON object per delivery, one per line.
    pub fn to_jsonl(&self) -> String {
        Self::render_jsonl(&self.deliveries)
    }

    pub fn render_jsonl(deliveries: &[Delivery]) -> String {
        let mut out = String::new();
        for d in deliveries {
            out.push_str(&d.to_json().to_string());
            out.push('\n');
        }
        out
    }
}
