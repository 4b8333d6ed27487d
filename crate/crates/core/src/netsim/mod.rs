//! Deterministic single-queue simulation of the untrusted storage network.
//!
//! Delivery is FIFO with no loss, reordering or latency. Every delivery is
//! appended to the [`Trace`], which is what the attack harness inspects.

mod message;
mod trace;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::crypto::{hash_parts, reencrypt, Digest, FileCiphertext, ReEncryptionKey};

pub use message::{Message, MessageKind, NodeId, Payload, ReplyStatus};
pub use trace::{Annotation, Delivery, Knowledge, NodeKnowledge, RoutingFailure, Trace};

pub const MIN_NODES: usize = 4;
const MAX_DELIVERIES_PER_RUN: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown destination node {0}")]
    UnknownNode(NodeId),
    #[error("network did not quiesce after {0} deliveries")]
    NoQuiescence(usize),
}

/// Storage held by one node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeState {
    pub blobs: BTreeMap<Digest, Vec<u8>>,
    /// Safe-channel payloads addressed to this node, oldest first.
    pub mailbox: Vec<Vec<u8>>,
}

/// Blob id under which a re-encrypted copy is stored at the sharing node.
///
/// Derived from the rule's fresh nonce so both the owner and the proxy can
/// compute it without the owner ever seeing the ciphertext.
pub fn shared_blob_id(rk: &ReEncryptionKey) -> Digest {
    hash_parts(&[b"metakey-shared-blob", rk.new_nonce().as_bytes()])
}

#[derive(Debug, Clone)]
pub struct Network {
    nodes: BTreeMap<NodeId, NodeState>,
    queue: VecDeque<(NodeId, Message)>,
    rng: ChaCha20Rng,
    clock: u64,
    next_seq: u64,
    trace: Trace,
}

impl Network {
    pub fn new(n_nodes: usize, seed: u64) -> Result<Self, NetError> {
        if n_nodes < MIN_NODES {
            return Err(NetError::Config(format!(
                "need at least {MIN_NODES} nodes (owner, receiver, N1, N2), got {n_nodes}"
            )));
        }
        Ok(Self {
            nodes: (0..n_nodes as u64).map(|i| (NodeId(i), NodeState::default())).collect(),
            queue: VecDeque::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
            clock: 0,
            next_seq: 0,
            trace: Trace::default(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.contains_key(&node)
    }

    pub fn node(&self, node: NodeId) -> Option<&NodeState> {
        self.nodes.get(&node)
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    /// Resumes logical time and sequence numbering, e.g. after reloading
    /// persisted node state. Only valid on a fresh network.
    pub fn resume_at(&mut self, clock: u64, next_seq: u64) {
        self.clock = clock;
        self.next_seq = next_seq;
    }

    /// Places a blob directly into a node's storage without a delivery.
    /// Used to restore persisted state.
    pub fn restore_blob(&mut self, node: NodeId, blob_id: Digest, blob: Vec<u8>) -> Result<(), NetError> {
        self.nodes
            .get_mut(&node)
            .ok_or(NetError::UnknownNode(node))?
            .blobs
            .insert(blob_id, blob);
        Ok(())
    }

    pub fn restore_mail(&mut self, node: NodeId, sealed: Vec<u8>) -> Result<(), NetError> {
        self.nodes
            .get_mut(&node)
            .ok_or(NetError::UnknownNode(node))?
            .mailbox
            .push(sealed);
        Ok(())
    }

    /// Flips one bit of a stored blob. Test and demo hook for corruption.
    pub fn tamper_blob(&mut self, node: NodeId, blob_id: &Digest, bit: usize) -> Result<(), NetError> {
        let blob = self
            .nodes
            .get_mut(&node)
            .ok_or(NetError::UnknownNode(node))?
            .blobs
            .get_mut(blob_id)
            .ok_or_else(|| NetError::Config(format!("node {node} does not store blob {blob_id}")))?;
        let bit = bit % (blob.len() * 8);
        blob[bit / 8] ^= 1 << (bit % 8);
        Ok(())
    }

    /// Uniformly random node outside `exclude`.
    pub fn pick_node(&mut self, exclude: &BTreeSet<NodeId>) -> Result<NodeId, NetError> {
        let candidates: Vec<NodeId> = self.nodes.keys().copied().filter(|n| !exclude.contains(n)).collect();
        if candidates.is_empty() {
            return Err(NetError::Config("no node left to pick".into()));
        }
        Ok(candidates[self.rng.gen_range(0..candidates.len())])
    }

    /// Records what `node` learned out of band (for instance by opening an
    /// envelope addressed to it).
    pub fn annotate(&mut self, node: NodeId, item: Knowledge) {
        self.trace.annotate(Annotation {
            time: self.clock,
            node,
            item,
        });
    }

    /// Enqueues a message sent by `origin`. Unknown destinations are
    /// recorded as routing failures in the trace.
    pub fn post(&mut self, origin: NodeId, message: Message) -> Result<(), NetError> {
        if !self.nodes.contains_key(&message.to) {
            self.fail(origin, &message, "unknown destination");
            return Err(NetError::UnknownNode(message.to));
        }
        self.queue.push_back((origin, message));
        Ok(())
    }

    fn fail(&mut self, origin: NodeId, message: &Message, reason: &str) {
        self.trace.record_failure(RoutingFailure {
            time: self.clock,
            origin,
            to: message.to,
            kind: message.kind(),
            reason: reason.to_string(),
        });
    }

    /// Delivers queued messages, including any follow-ups, until the queue
    /// is empty. Returns the deliveries made by this call.
    pub fn run_until_idle(&mut self) -> Result<Vec<Delivery>, NetError> {
        let start = self.trace.deliveries().len();
        let mut delivered = 0usize;
        while let Some((origin, message)) = self.queue.pop_front() {
            delivered += 1;
            if delivered > MAX_DELIVERIES_PER_RUN {
                return Err(NetError::NoQuiescence(MAX_DELIVERIES_PER_RUN));
            }
            self.clock += 1;
            let delivery = Delivery {
                seq: self.next_seq,
                time: self.clock,
                origin,
                message,
            };
            self.next_seq += 1;
            self.trace.record(delivery.clone());
            for (from, follow_up) in self.handle(&delivery) {
                // unroutable follow-ups are recorded in the trace by post()
                let _ = self.post(from, follow_up);
            }
        }
        Ok(self.trace.deliveries()[start..].to_vec())
    }

    fn handle(&mut self, delivery: &Delivery) -> Vec<(NodeId, Message)> {
        let me = delivery.message.to;
        let reply_to = delivery.message.from_visible;
        let state = self.nodes.get_mut(&me).expect("destination checked at post");
        let reply = |payload: Payload| match reply_to {
            Some(to) => vec![(me, Message::from(me, to, payload))],
            None => Vec::new(),
        };
        match &delivery.message.payload {
            Payload::StoreBlob { blob_id, blob } | Payload::TransferBlob { blob_id, blob } => {
                state.blobs.entry(*blob_id).or_insert_with(|| blob.clone());
                Vec::new()
            }
            Payload::FetchBlob { blob_id } => {
                let status = match state.blobs.get(blob_id) {
                    Some(b) => ReplyStatus::Found(b.clone()),
                    None => ReplyStatus::NotFound,
                };
                reply(Payload::BlobReply {
                    blob_id: *blob_id,
                    status,
                })
            }
            Payload::BlobReply { .. } => Vec::new(),
            Payload::SafeChannel { sealed } => {
                state.mailbox.push(sealed.clone());
                Vec::new()
            }
            Payload::ReencryptAndForward { blob_id, rk, dest } => {
                let Some(blob) = state.blobs.get(blob_id) else {
                    return reply(Payload::BlobReply {
                        blob_id: *blob_id,
                        status: ReplyStatus::NotFound,
                    });
                };
                let transformed = FileCiphertext::from_bytes(blob).and_then(|c| reencrypt(rk, &c));
                match transformed {
                    Ok(c2) => vec![(
                        me,
                        Message::anonymous(
                            *dest,
                            Payload::TransferBlob {
                                blob_id: shared_blob_id(rk),
                                blob: c2.to_bytes(),
                            },
                        ),
                    )],
                    Err(e) => reply(Payload::BlobReply {
                        blob_id: *blob_id,
                        status: ReplyStatus::Rejected(e.to_string()),
                    }),
                }
            }
        }
    }
}
