//! Store, retrieve and share flows over the crypto layer, the ledger and the
//! simulated network.
//!
//! Sharing follows six steps:
//!
//! 1. the owner opens its meta-key from the ledger, learning `S` and the
//!    storage node N1;
//! 2. it draws a fresh key `S'` and builds the re-encryption rule;
//! 3. N1 re-encrypts its copy under the rule;
//! 4. and forwards it anonymously to a random sharing node N2;
//! 5. the owner sends `S'` and N2's location to the receiver, wrapped to the
//!    receiver's public key;
//! 6. the receiver fetches from N2 and decrypts with `S'`.
//!
//! The owner never downloads or re-uploads the file while sharing, and keeps
//! no symmetric key between operations.

use std::collections::BTreeSet;

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    envelope_unwrap, envelope_wrap, hash, pre_decrypt, pre_encrypt_with_limit, rekey, CryptoError, DesignationPolicy,
    Digest, FileCiphertext, KeyPair, Nonce, PublicKey, SymKey, MAX_MESSAGE_LEN,
};
use crate::ledger::{Chain, LedgerError, MetadataRecord, Record, ShareRecord};
use crate::netsim::{
    shared_blob_id, Delivery, Knowledge, Message, MessageKind, NetError, Network, NodeId, Payload, ReplyStatus,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("no metadata record for file {0}")]
    NotFound(Digest),
    #[error("blob {0} not found at its storage node")]
    BlobMissing(Digest),
    #[error("not authorized: {0}")]
    Authorization(String),
    #[error("role conflict: {0}")]
    RoleConflict(String),
    #[error("stored data is corrupted: {0}")]
    Corruption(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Config {
    pub n_nodes: usize,
    pub seed: u64,
    pub dpolicy: DesignationPolicy,
    pub max_file_size: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            n_nodes: 10,
            seed: 0,
            dpolicy: DesignationPolicy::Last,
            max_file_size: MAX_MESSAGE_LEN,
        }
    }
}

/// A user node. Holds only its identity and envelope key pair.
#[derive(Debug, Clone)]
pub struct UserAgent {
    pub id: NodeId,
    pub keypair: KeyPair,
}

/// What others need to address a user: its node and public key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublicIdentity {
    pub id: NodeId,
    pub public: PublicKey,
}

impl UserAgent {
    pub fn new(id: NodeId, keypair: KeyPair) -> Self {
        Self { id, keypair }
    }

    pub fn generate<R: RngCore + CryptoRng>(id: NodeId, rng: &mut R) -> Self {
        Self::new(id, KeyPair::generate(rng))
    }

    pub fn identity(&self) -> PublicIdentity {
        PublicIdentity {
            id: self.id,
            public: self.keypair.public,
        }
    }
}

const META_KEY_VERSION: u8 = 1;
const META_KEY_LEN: usize = 1 + 16 + 1 + 8 + 16 + 4;

/// Plaintext of the on-chain meta-key: everything the owner needs to find,
/// decrypt and re-key its file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaKey {
    pub key: SymKey,
    pub policy: DesignationPolicy,
    pub location: NodeId,
    pub nonce: Nonce,
    pub block_count: u32,
}

impl MetaKey {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(META_KEY_LEN);
        out.push(META_KEY_VERSION);
        out.extend_from_slice(self.key.as_bytes());
        out.push(self.policy.code());
        out.extend_from_slice(&self.location.0.to_be_bytes());
        out.extend_from_slice(self.nonce.as_bytes());
        out.extend_from_slice(&self.block_count.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != META_KEY_LEN || bytes[0] != META_KEY_VERSION {
            return Err(CryptoError::Format("malformed meta-key"));
        }
        Ok(Self {
            key: SymKey::from_slice(&bytes[1..17])?,
            policy: DesignationPolicy::from_code(bytes[17])?,
            location: NodeId(u64::from_be_bytes(bytes[18..26].try_into().expect("8 bytes"))),
            nonce: Nonce::from_bytes(bytes[26..42].try_into().expect("16 bytes")),
            block_count: u32::from_be_bytes(bytes[42..46].try_into().expect("4 bytes")),
        })
    }
}

/// Safe-channel payload: the sharing key and where the shared copy lives.
/// Carries neither the owner's key nor the original location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareGrant {
    pub file_id: Digest,
    pub share_location: NodeId,
    pub shared_blob_id: Digest,
    pub new_key: SymKey,
}

impl ShareGrant {
    pub const ENCODED_LEN: usize = 32 + 8 + 32 + 16;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::ENCODED_LEN);
        out.extend_from_slice(self.file_id.as_bytes());
        out.extend_from_slice(&self.share_location.0.to_be_bytes());
        out.extend_from_slice(self.shared_blob_id.as_bytes());
        out.extend_from_slice(self.new_key.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != Self::ENCODED_LEN {
            return Err(CryptoError::Format("malformed share grant"));
        }
        Ok(Self {
            file_id: Digest(bytes[..32].try_into().expect("32 bytes")),
            share_location: NodeId(u64::from_be_bytes(bytes[32..40].try_into().expect("8 bytes"))),
            shared_blob_id: Digest(bytes[40..72].try_into().expect("32 bytes")),
            new_key: SymKey::from_slice(&bytes[72..])?,
        })
    }

    pub fn digest(&self) -> Digest {
        hash(&self.encode())
    }
}

/// Who played which part in one share, as known to the owner after the fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roles {
    pub owner: NodeId,
    pub receiver: NodeId,
    pub n1: NodeId,
    pub n2: NodeId,
    pub file_id: Digest,
    pub shared_blob_id: Digest,
}

/// One simulated deployment: network, ledger, and the randomness that
/// drives every key, nonce and node choice.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub network: Network,
    pub chain: Chain,
    rng: ChaCha20Rng,
    policy: DesignationPolicy,
    max_file_size: usize,
    users: BTreeSet<NodeId>,
}

impl Deployment {
    pub fn new(config: &Config) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self::from_parts(
            Network::new(config.n_nodes, config.seed)?,
            Chain::genesis(),
            rng,
            config,
        ))
    }

    pub fn from_parts(network: Network, chain: Chain, rng: ChaCha20Rng, config: &Config) -> Self {
        Self {
            network,
            chain,
            rng,
            policy: config.dpolicy,
            max_file_size: config.max_file_size,
            users: BTreeSet::new(),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub fn policy(&self) -> DesignationPolicy {
        self.policy
    }

    /// Creates a user at `id` and registers it.
    pub fn new_agent(&mut self, id: NodeId) -> Result<UserAgent> {
        let agent = UserAgent::generate(id, &mut self.rng);
        self.register(id)?;
        Ok(agent)
    }

    /// Marks `id` as a user node. User nodes are never picked as storage
    /// or sharing locations.
    pub fn register(&mut self, id: NodeId) -> Result<()> {
        if !self.network.contains(id) {
            return Err(NetError::UnknownNode(id).into());
        }
        self.users.insert(id);
        Ok(())
    }

    pub fn users(&self) -> &BTreeSet<NodeId> {
        &self.users
    }

    fn pick_storage(&mut self, also_exclude: &[NodeId]) -> Result<NodeId> {
        let mut exclude = self.users.clone();
        exclude.extend(also_exclude.iter().copied());
        Ok(self.network.pick_node(&exclude)?)
    }

    /// Sealed grants waiting in a node's mailbox, oldest first.
    pub fn mailbox(&self, node: NodeId) -> &[Vec<u8>] {
        self.network.node(node).map(|n| n.mailbox.as_slice()).unwrap_or(&[])
    }

    /// Encrypts and stores `plaintext` on a random node and records the
    /// meta-key on chain. Returns the file id (hash of the stored blob).
    pub fn store_file(&mut self, owner: &UserAgent, plaintext: &[u8]) -> Result<Digest> {
        let key = SymKey::generate(&mut self.rng);
        let c = pre_encrypt_with_limit(&key, plaintext, self.policy, self.max_file_size, &mut self.rng)?;
        let blob = c.to_bytes();
        let file_id = hash(&blob);

        let n1 = self.pick_storage(&[owner.id])?;
        self.network.post(
            owner.id,
            Message::from(owner.id, n1, Payload::StoreBlob { blob_id: file_id, blob }),
        )?;
        self.network.run_until_idle()?;
        self.network.annotate(owner.id, Knowledge::Node(n1));
        self.network.annotate(owner.id, Knowledge::OriginalKey { file_id });

        let meta = MetaKey {
            key,
            policy: self.policy,
            location: n1,
            nonce: *c.nonce(),
            block_count: c.block_count(),
        };
        let wrapped_key = envelope_wrap(&owner.keypair.public, &meta.encode(), &mut self.rng)?;
        let now = self.network.clock();
        self.chain.append(
            vec![Record::Metadata(MetadataRecord {
                file_id,
                owner_id: owner.id,
                content_hash: file_id,
                wrapped_key,
                created_at: now,
            })],
            now,
        )?;
        Ok(file_id)
    }

    pub fn open_meta_key(&self, agent: &UserAgent, file_id: &Digest) -> Result<(MetadataRecord, MetaKey)> {
        let record = self
            .chain
            .metadata_for(file_id)
            .cloned()
            .ok_or(ProtocolError::NotFound(*file_id))?;
        let plain = envelope_unwrap(&agent.keypair.private, &record.wrapped_key)
            .map_err(|_| ProtocolError::Authorization(format!("node {} cannot open the meta-key", agent.id)))?;
        let meta = MetaKey::decode(&plain).map_err(|e| ProtocolError::Corruption(e.to_string()))?;
        Ok((record, meta))
    }

    /// Storage node of a file, as only its owner can learn it.
    pub fn locate(&self, owner: &UserAgent, file_id: &Digest) -> Result<NodeId> {
        Ok(self.open_meta_key(owner, file_id)?.1.location)
    }

    fn fetch(&mut self, requester: NodeId, holder: NodeId, blob_id: Digest) -> Result<Vec<u8>> {
        self.network.post(
            requester,
            Message::from(requester, holder, Payload::FetchBlob { blob_id }),
        )?;
        let delta = self.network.run_until_idle()?;
        match find_reply(&delta, requester, &blob_id) {
            Some(ReplyStatus::Found(blob)) => Ok(blob.clone()),
            _ => Err(ProtocolError::BlobMissing(blob_id)),
        }
    }

    pub fn retrieve_file(&mut self, owner: &UserAgent, file_id: &Digest) -> Result<Vec<u8>> {
        let (record, meta) = self.open_meta_key(owner, file_id)?;
        self.network.annotate(owner.id, Knowledge::Node(meta.location));
        let blob = self.fetch(owner.id, meta.location, *file_id)?;
        if hash(&blob) != record.content_hash {
            return Err(ProtocolError::Corruption("blob hash does not match ledger".into()));
        }
        let c = FileCiphertext::from_bytes(&blob).map_err(|e| ProtocolError::Corruption(e.to_string()))?;
        pre_decrypt(&meta.key, &c).map_err(|e| ProtocolError::Corruption(e.to_string()))
    }

    /// Shares a stored file with `receiver`. The sealed grant lands in the
    /// receiver's mailbox; the plain grant is returned to the owner.
    pub fn share_file(&mut self, owner: &UserAgent, file_id: &Digest, receiver: &PublicIdentity) -> Result<ShareGrant> {
        let (record, meta) = self.open_meta_key(owner, file_id)?;
        if record.owner_id != owner.id {
            return Err(ProtocolError::Authorization(format!(
                "node {} does not own {file_id}",
                owner.id
            )));
        }
        if !self.network.contains(receiver.id) {
            return Err(NetError::UnknownNode(receiver.id).into());
        }
        if receiver.id == meta.location || receiver.id == owner.id {
            return Err(ProtocolError::RoleConflict(format!(
                "receiver {} must differ from the owner and the storage node",
                receiver.id
            )));
        }
        self.network
            .annotate(owner.id, Knowledge::OriginalKey { file_id: *file_id });
        self.network.annotate(owner.id, Knowledge::Node(meta.location));

        let new_key = SymKey::generate(&mut self.rng);
        let dset = meta.policy.designate(meta.block_count)?;
        let rk = rekey(&meta.key, &meta.nonce, &new_key, &dset, &mut self.rng)?;
        let shared_id = shared_blob_id(&rk);

        let n2 = self.pick_storage(&[owner.id, meta.location, receiver.id])?;
        self.network.post(
            owner.id,
            Message::from(
                owner.id,
                meta.location,
                Payload::ReencryptAndForward {
                    blob_id: *file_id,
                    rk,
                    dest: n2,
                },
            ),
        )?;
        let delta = self.network.run_until_idle()?;
        if let Some(status) = find_reply(&delta, owner.id, file_id) {
            return Err(match status {
                ReplyStatus::Rejected(reason) => ProtocolError::Corruption(reason.clone()),
                _ => ProtocolError::BlobMissing(*file_id),
            });
        }
        let transferred = delta
            .iter()
            .any(|d| d.kind() == MessageKind::TransferBlob && d.message.to == n2);
        if !transferred {
            return Err(ProtocolError::BlobMissing(*file_id));
        }

        let grant = ShareGrant {
            file_id: *file_id,
            share_location: n2,
            shared_blob_id: shared_id,
            new_key,
        };
        let sealed = envelope_wrap(&receiver.public, &grant.encode(), &mut self.rng)?;
        self.network.post(
            owner.id,
            Message::from(owner.id, receiver.id, Payload::SafeChannel { sealed }),
        )?;
        self.network.run_until_idle()?;
        self.network
            .annotate(owner.id, Knowledge::SharedKey { file_id: *file_id });
        self.network.annotate(owner.id, Knowledge::Node(n2));

        let now = self.network.clock();
        self.chain.append(
            vec![Record::Share(ShareRecord {
                file_id: *file_id,
                owner_id: owner.id,
                grant_hash: grant.digest(),
                created_at: now,
            })],
            now,
        )?;
        Ok(grant)
    }

    /// Opens a sealed grant and downloads and decrypts the shared copy.
    pub fn accept_share(&mut self, receiver: &UserAgent, sealed_grant: &[u8]) -> Result<Vec<u8>> {
        let grant = ShareGrant::decode(&envelope_unwrap(&receiver.keypair.private, sealed_grant)?)?;
        self.network
            .annotate(receiver.id, Knowledge::Node(grant.share_location));
        self.network
            .annotate(receiver.id, Knowledge::SharedKey { file_id: grant.file_id });
        let blob = self.fetch(receiver.id, grant.share_location, grant.shared_blob_id)?;
        let c = FileCiphertext::from_bytes(&blob).map_err(|e| ProtocolError::Corruption(e.to_string()))?;
        pre_decrypt(&grant.new_key, &c).map_err(|e| ProtocolError::Corruption(e.to_string()))
    }

    /// Roles of a completed share, reconstructed by the owner.
    pub fn roles(&self, owner: &UserAgent, receiver: NodeId, grant: &ShareGrant) -> Result<Roles> {
        Ok(Roles {
            owner: owner.id,
            receiver,
            n1: self.locate(owner, &grant.file_id)?,
            n2: grant.share_location,
            file_id: grant.file_id,
            shared_blob_id: grant.shared_blob_id,
        })
    }
}

fn find_reply<'a>(delta: &'a [Delivery], to: NodeId, blob_id: &Digest) -> Option<&'a ReplyStatus> {
    delta.iter().find_map(|d| match &d.message.payload {
        Payload::BlobReply { blob_id: id, status } if d.message.to == to && id == blob_id => Some(status),
        _ => None,
    })
}

/// Outcome of one scripted store → share → accept run.
#[derive(Debug, Clone)]
pub struct SharingRun {
    pub deployment: Deployment,
    pub owner: UserAgent,
    pub receiver: UserAgent,
    pub plaintext: Vec<u8>,
    pub recovered: Vec<u8>,
    pub grant: ShareGrant,
    pub roles: Roles,
    /// Index of the first delivery belonging to the share phase.
    pub share_start: usize,
    /// Index one past the last delivery of the share phase.
    pub share_end: usize,
}

/// Runs the full sharing flow on a fresh seeded deployment with node 0 as
/// owner and node 1 as receiver.
pub fn run_sharing_scenario(config: &Config, plaintext_len: usize) -> Result<SharingRun> {
    let mut deployment = Deployment::new(config)?;
    let owner = deployment.new_agent(NodeId(0))?;
    let receiver = deployment.new_agent(NodeId(1))?;
    let plaintext: Vec<u8> = (0..plaintext_len).map(|_| deployment.rng().gen()).collect();

    let file_id = deployment.store_file(&owner, &plaintext)?;
    let share_start = deployment.network.trace().deliveries().len();
    let grant = deployment.share_file(&owner, &file_id, &receiver.identity())?;
    let share_end = deployment.network.trace().deliveries().len();
    let sealed = deployment
        .mailbox(receiver.id)
        .last()
        .cloned()
        .ok_or_else(|| ProtocolError::Corruption("grant not delivered".into()))?;
    let recovered = deployment.accept_share(&receiver, &sealed)?;
    let roles = deployment.roles(&owner, receiver.id, &grant)?;
    Ok(SharingRun {
        deployment,
        owner,
        receiver,
        plaintext,
        recovered,
        grant,
        roles,
        share_start,
        share_end,
    })
}
