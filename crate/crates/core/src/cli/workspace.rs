//! On-disk state shared between CLI invocations.
//!
//! ```text
//! <ws>/config.json            deployment parameters
//! <ws>/chain.jsonl            ledger, one block per line
//! <ws>/state.json             clock, next sequence number, operation counter
//! <ws>/keys/<node>.json       user private keys
//! <ws>/nodes/<node>/<id>.blob stored ciphertexts
//! <ws>/nodes/<node>/mail/<n>.bin  delivered grants
//! <ws>/.lock                  present while a command runs
//! ```

use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::crypto::{hash_parts, Digest, KeyPair, PrivateKey};
use crate::ledger::Chain;
use crate::netsim::{Network, NodeId};
use crate::protocol::{Config, Deployment, UserAgent};

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct State {
    pub clock: u64,
    pub next_seq: u64,
    pub ops: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct KeyFile {
    node: NodeId,
    private_key: String,
}

/// Held for the duration of a command; removes the lock file on drop.
#[derive(Debug)]
pub struct Lock(PathBuf);

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn chain_path(&self) -> PathBuf {
        self.path("chain.jsonl")
    }

    fn node_dir(&self, node: NodeId) -> PathBuf {
        self.root.join("nodes").join(node.to_string())
    }

    pub fn is_initialized(&self) -> bool {
        self.path("config.json").exists()
    }

    pub fn lock(&self) -> Result<Lock, CliError> {
        let path = self.path(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Lock(path)),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(CliError::Locked(self.root.clone())),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, rel: &str) -> Result<T, CliError> {
        let path = self.path(rel);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
    }

    fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(rel);
        let text = serde_json::to_string_pretty(value).expect("state serializes");
        write(&path, text.as_bytes())
    }

    pub fn config(&self) -> Result<Config, CliError> {
        if !self.is_initialized() {
            return Err(CliError::NotInitialized(self.root.clone()));
        }
        self.read_json("config.json")
    }

    pub fn state(&self) -> Result<State, CliError> {
        self.read_json("state.json")
    }

    pub fn chain_text(&self) -> Result<String, CliError> {
        let path = self.chain_path();
        fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))
    }

    pub fn init(&self, config: &Config) -> Result<Vec<NodeId>, CliError> {
        if self.is_initialized() {
            return Err(CliError::AlreadyInitialized(self.root.clone()));
        }
        fs::create_dir_all(&self.root).map_err(|e| CliError::io(&self.root, e))?;
        let _lock = self.lock()?;
        let mut rng = op_rng(config.seed, 0);
        let users = [NodeId(0), NodeId(1)];
        for id in users {
            self.save_key(&UserAgent::generate(id, &mut rng))?;
        }
        write(&self.chain_path(), Chain::genesis().to_jsonl().as_bytes())?;
        self.write_json(
            "state.json",
            &State {
                ops: 1,
                ..State::default()
            },
        )?;
        self.write_json("config.json", config)?;
        Ok(users.to_vec())
    }

    fn save_key(&self, agent: &UserAgent) -> Result<(), CliError> {
        let file = KeyFile {
            node: agent.id,
            private_key: hex::encode(agent.keypair.private.to_bytes()),
        };
        fs::create_dir_all(self.path("keys")).map_err(|e| CliError::io(&self.path("keys"), e))?;
        self.write_json(&format!("keys/{}.json", agent.id), &file)
    }

    pub fn agents(&self) -> Result<Vec<UserAgent>, CliError> {
        let dir = self.path("keys");
        let mut agents = Vec::new();
        for path in sorted_entries(&dir)? {
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let file: KeyFile =
                serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
            let mut bytes = [0u8; 32];
            hex::decode_to_slice(&file.private_key, &mut bytes)
                .map_err(|_| CliError::Format(format!("{}: bad private key", path.display())))?;
            agents.push(UserAgent::new(
                file.node,
                KeyPair::from_private(PrivateKey::from_bytes(bytes)),
            ));
        }
        agents.sort_by_key(|a| a.id);
        Ok(agents)
    }

    pub fn agent(&self, id: NodeId) -> Result<UserAgent, CliError> {
        self.agents()?
            .into_iter()
            .find(|a| a.id == id)
            .ok_or(CliError::UnknownUser(id))
    }

    /// Rebuilds the deployment from disk. The ledger must verify.
    pub fn load(&self) -> Result<(Deployment, State), CliError> {
        let config = self.config()?;
        let state = self.state()?;
        let chain = Chain::from_jsonl(&self.chain_text()?)?;
        chain.verify()?;

        let mut rng = op_rng(config.seed, state.ops);
        let mut network = Network::new(config.n_nodes, rng.next_u64())?;
        for node in network.node_ids().collect::<Vec<_>>() {
            let dir = self.node_dir(node);
            for path in sorted_entries(&dir)? {
                if path.extension().is_some_and(|e| e == "blob") {
                    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                    let id = Digest::from_hex(stem)
                        .map_err(|_| CliError::Format(format!("{}: bad blob name", path.display())))?;
                    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
                    network.restore_blob(node, id, bytes)?;
                }
            }
            let mut mail: Vec<(u64, PathBuf)> = sorted_entries(&dir.join("mail"))?
                .into_iter()
                .filter_map(|p| Some((p.file_stem()?.to_str()?.parse().ok()?, p)))
                .collect();
            mail.sort();
            for (_, path) in mail {
                network.restore_mail(node, fs::read(&path).map_err(|e| CliError::io(&path, e))?)?;
            }
        }
        network.resume_at(state.clock, state.next_seq);

        let mut deployment = Deployment::from_parts(network, chain, rng, &config);
        for agent in self.agents()? {
            deployment.register(agent.id)?;
        }
        Ok((deployment, state))
    }

    /// Writes back the ledger, any new blobs and grants, and the counters.
    pub fn save(&self, deployment: &Deployment, state: State) -> Result<(), CliError> {
        write(&self.chain_path(), deployment.chain.to_jsonl().as_bytes())?;
        let net = &deployment.network;
        for node in net.node_ids() {
            let Some(ns) = net.node(node) else { continue };
            let dir = self.node_dir(node);
            for (id, blob) in &ns.blobs {
                let path = dir.join(format!("{}.blob", id.to_hex()));
                if !path.exists() {
                    write(&path, blob)?;
                }
            }
            for (n, sealed) in ns.mailbox.iter().enumerate() {
                let path = dir.join("mail").join(format!("{n}.bin"));
                if !path.exists() {
                    write(&path, sealed)?;
                }
            }
        }
        self.write_json(
            "state.json",
            &State {
                clock: net.clock(),
                next_seq: net.next_seq(),
                ops: state.ops + 1,
            },
        )
    }
}

/// Randomness for the `ops`-th command on a workspace seeded with `seed`.
fn op_rng(seed: u64, ops: u64) -> ChaCha20Rng {
    let d = hash_parts(&[b"metakey-cli-op", &seed.to_be_bytes(), &ops.to_be_bytes()]);
    ChaCha20Rng::from_seed(d.0)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(CliError::io(dir, e)),
    };
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub(super) fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
