//! Command-line front end. Every command prints one JSON document on
//! stdout; failures print `{"code", "message"}` and exit nonzero.

mod workspace;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

pub use workspace::{State, Workspace};

use crate::attacks::matrix_table;
use crate::crypto::{envelope_unwrap, hash, CryptoError, Digest};
use crate::ledger::{Chain, LedgerError, VerifyError};
use crate::netsim::{NetError, NodeId, Trace, MIN_NODES};
use crate::protocol::{run_sharing_scenario, Config, ProtocolError, ShareGrant};

pub const DEFAULT_WORKSPACE: &str = ".metakey";
const DEMO_PLAINTEXT_LEN: usize = 1000;

#[derive(Debug, Parser)]
#[command(
    name = "metakey",
    version,
    about = "Meta-key file sharing on a simulated storage network"
)]
pub struct Cli {
    /// Workspace directory holding the chain, node storage and keys.
    #[arg(long, global = true, env = "METAKEY_WORKSPACE", default_value = DEFAULT_WORKSPACE)]
    pub workspace: PathBuf,
    /// Seed for `init`, `demo` and `attack`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON config file read by `init`, `demo` and `attack`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write this command's message deliveries as JSON lines.
    #[arg(long, global = true)]
    pub json_trace: Option<PathBuf>,
    /// Acting user node.
    #[arg(long = "as", global = true)]
    pub acting: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a workspace: config, genesis block and keys for users 0 and 1.
    Init,
    /// Encrypt a file onto a random storage node and record its meta-key.
    Store { path: PathBuf },
    /// Fetch and decrypt a stored file.
    Get { file_id: String, out: PathBuf },
    /// Relocate a re-encrypted copy and seal a grant to another user.
    Share {
        file_id: String,
        #[arg(long)]
        to: u64,
        /// Where to write the grant; defaults to `<workspace>/grants/`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Open a grant and fetch the shared copy.
    Accept { grant: PathBuf, out: PathBuf },
    /// Verify the ledger hash chain.
    Audit,
    /// Collusion analysis.
    Attack {
        #[command(subcommand)]
        kind: AttackCommand,
    },
    /// Run the full store, share and accept flow in memory and dump the trace.
    Demo,
}

#[derive(Debug, Subcommand)]
pub enum AttackCommand {
    /// Closure and feasibility verdicts for every coalition of untrusted roles.
    Matrix,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("workspace {0} is locked by another command")]
    Locked(PathBuf),
    #[error("workspace {0} is not initialized")]
    NotInitialized(PathBuf),
    #[error("workspace {0} already exists")]
    AlreadyInitialized(PathBuf),
    #[error("node {0} has no user key in this workspace")]
    UnknownUser(NodeId),
    #[error("grant does not open with any local user key")]
    GrantNotForUs,
    #[error(transparent)]
    Verification(#[from] VerifyError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Format(_) => "format",
            CliError::Config(_) => "config",
            CliError::Locked(_) => "locked",
            CliError::NotInitialized(_) => "not_initialized",
            CliError::AlreadyInitialized(_) => "already_initialized",
            CliError::UnknownUser(_) => "unknown_user",
            CliError::GrantNotForUs => "bad_grant",
            CliError::Verification(_) => "verification_failed",
            CliError::Protocol(p) => match p {
                ProtocolError::NotFound(_) => "not_found",
                ProtocolError::BlobMissing(_) => "blob_missing",
                ProtocolError::Authorization(_) => "unauthorized",
                ProtocolError::RoleConflict(_) => "role_conflict",
                ProtocolError::Corruption(_) => "corrupted",
                ProtocolError::Crypto(_) => "crypto",
                ProtocolError::Net(_) => "network",
                ProtocolError::Ledger(LedgerError::Verification(_)) => "verification_failed",
                ProtocolError::Ledger(_) => "ledger",
            },
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "code": self.code(), "message": self.to_string() });
        let verify = match self {
            CliError::Verification(e) | CliError::Protocol(ProtocolError::Ledger(LedgerError::Verification(e))) => {
                Some(e)
            }
            _ => None,
        };
        if let Some(e) = verify {
            v["height"] = json!(e.height);
        }
        v
    }
}

impl From<LedgerError> for CliError {
    fn from(e: LedgerError) -> Self {
        CliError::Protocol(e.into())
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        CliError::Protocol(e.into())
    }
}

/// Result of one invocation: exit code plus the text for each stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) if !e.use_stderr() => Output {
            code: 0,
            stdout: String::new(),
            stderr: e.to_string(),
        },
        Err(e) => {
            let msg = e.to_string();
            let msg = msg.trim_start_matches("error: ").trim_end();
            failure(&CliError::Usage(msg.to_string()), 2)
        }
    }
}

pub fn execute(cli: &Cli) -> Output {
    match dispatch(cli) {
        Ok(v) => Output {
            code: 0,
            stdout: format!("{v}\n"),
            stderr: String::new(),
        },
        Err(e) => failure(&e, 1),
    }
}

fn failure(e: &CliError, code: i32) -> Output {
    Output {
        code,
        stdout: format!("{}\n", e.to_json()),
        stderr: format!("error: {e}\n"),
    }
}

fn dispatch(cli: &Cli) -> Result<Value, CliError> {
    let ws = Workspace::new(&cli.workspace);
    match &cli.command {
        Command::Init => init(cli, &ws),
        Command::Store { path } => with_deployment(cli, &ws, |d, ws| {
            let owner = ws.agent(acting(cli, 0))?;
            let data = fs::read(path).map_err(|e| CliError::io(path, e))?;
            let file_id = d.store_file(&owner, &data)?;
            Ok(json!({ "file_id": file_id.to_hex(), "owner": owner.id, "size": data.len() }))
        }),
        Command::Get { file_id, out } => with_deployment(cli, &ws, |d, ws| {
            let owner = ws.agent(acting(cli, 0))?;
            let id = parse_file_id(file_id)?;
            let data = d.retrieve_file(&owner, &id)?;
            workspace::write(out, &data)?;
            Ok(json!({ "file_id": id.to_hex(), "out": out, "size": data.len() }))
        }),
        Command::Share { file_id, to, out } => with_deployment(cli, &ws, |d, ws| {
            let owner = ws.agent(acting(cli, 0))?;
            let receiver = ws.agent(NodeId(*to))?;
            let id = parse_file_id(file_id)?;
            let grant = d.share_file(&owner, &id, &receiver.identity())?;
            let sealed = d
                .mailbox(receiver.id)
                .last()
                .cloned()
                .ok_or_else(|| ProtocolError::Corruption("grant was not delivered".into()))?;
            let path = out.clone().unwrap_or_else(|| {
                ws.root()
                    .join("grants")
                    .join(format!("{}-to-{}.grant", &id.to_hex()[..16], receiver.id))
            });
            workspace::write(&path, &sealed)?;
            Ok(json!({
                "file_id": id.to_hex(),
                "receiver": receiver.id,
                "grant": path,
                "grant_hash": grant.digest().to_hex(),
            }))
        }),
        Command::Accept { grant, out } => with_deployment(cli, &ws, |d, ws| {
            let sealed = fs::read(grant).map_err(|e| CliError::io(grant, e))?;
            let candidates = match cli.acting {
                Some(id) => vec![ws.agent(NodeId(id))?],
                None => ws.agents()?,
            };
            let receiver = candidates
                .into_iter()
                .find(|a| envelope_unwrap(&a.keypair.private, &sealed).is_ok())
                .ok_or(CliError::GrantNotForUs)?;
            let file_id = ShareGrant::decode(&envelope_unwrap(&receiver.keypair.private, &sealed).map_err(proto)?)
                .map_err(proto)?
                .file_id;
            let data = d.accept_share(&receiver, &sealed)?;
            workspace::write(out, &data)?;
            Ok(json!({ "file_id": file_id.to_hex(), "receiver": receiver.id, "out": out, "size": data.len() }))
        }),
        Command::Audit => audit(&ws),
        Command::Attack {
            kind: AttackCommand::Matrix,
        } => {
            let run = run_sharing_scenario(&standalone_config(cli)?, DEMO_PLAINTEXT_LEN)?;
            let trace = run.deployment.network.trace();
            write_trace(cli, trace)?;
            Ok(matrix_table(trace, &run.roles))
        }
        Command::Demo => demo(cli),
    }
}

fn proto(e: CryptoError) -> CliError {
    CliError::Protocol(e.into())
}

fn acting(cli: &Cli, default: u64) -> NodeId {
    NodeId(cli.acting.unwrap_or(default))
}

fn parse_file_id(s: &str) -> Result<Digest, CliError> {
    Digest::from_hex(s).map_err(|_| CliError::Usage(format!("file id must be 64 hex characters, got {s:?}")))
}

fn read_config(path: &Path) -> Result<Config, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Config for commands that run without a workspace: `--config`, then
/// `--seed` on top of it.
fn standalone_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(p) => read_config(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if config.n_nodes < MIN_NODES {
        return Err(CliError::Config(format!("n_nodes must be at least {MIN_NODES}")));
    }
    Ok(config)
}

fn init(cli: &Cli, ws: &Workspace) -> Result<Value, CliError> {
    let config = standalone_config(cli)?;
    let users = ws.init(&config)?;
    Ok(json!({ "workspace": ws.root(), "config": config, "users": users, "blocks": 1 }))
}

fn with_deployment<F>(cli: &Cli, ws: &Workspace, f: F) -> Result<Value, CliError>
where
    F: FnOnce(&mut crate::protocol::Deployment, &Workspace) -> Result<Value, CliError>,
{
    ws.config()?;
    let _lock = ws.lock()?;
    let (mut d, state) = ws.load()?;
    let seen = d.network.trace().deliveries().len();
    let result = f(&mut d, ws);
    let deliveries = &d.network.trace().deliveries()[seen..];
    if let Some(path) = &cli.json_trace {
        workspace::write(path, Trace::render_jsonl(deliveries).as_bytes())?;
    }
    // Blobs and grants already delivered stay delivered even if the
    // command failed afterwards.
    ws.save(&d, state)?;
    result
}

fn write_trace(cli: &Cli, trace: &Trace) -> Result<(), CliError> {
    match &cli.json_trace {
        Some(path) => workspace::write(path, trace.to_jsonl().as_bytes()),
        None => Ok(()),
    }
}

fn audit(ws: &Workspace) -> Result<Value, CliError> {
    ws.config()?;
    let chain = match Chain::from_jsonl(&ws.chain_text()?) {
        Ok(c) => c,
        Err(LedgerError::Json { line, source }) => {
            return Err(CliError::Verification(VerifyError {
                height: line as u64 - 1,
                reason: crate::ledger::FailureReason::Decode(source.to_string()),
            }))
        }
        Err(e) => return Err(e.into()),
    };
    chain.verify()?;
    let tip = chain.tip().block_hash.to_hex();
    Ok(json!({ "ok": true, "blocks": chain.len(), "tip": tip }))
}

fn demo(cli: &Cli) -> Result<Value, CliError> {
    let config = standalone_config(cli)?;
    let run = run_sharing_scenario(&config, DEMO_PLAINTEXT_LEN)?;
    let trace = run.deployment.network.trace();
    write_trace(cli, trace)?;
    let r = &run.roles;
    Ok(json!({
        "seed": config.seed,
        "roles": { "owner": r.owner, "receiver": r.receiver, "n1": r.n1, "n2": r.n2 },
        "file_id": r.file_id.to_hex(),
        "shared_blob_id": r.shared_blob_id.to_hex(),
        "plaintext_hash": hash(&run.plaintext).to_hex(),
        "recovered": run.recovered == run.plaintext,
        "ledger_blocks": run.deployment.chain.len(),
        "trace": trace.deliveries().iter().map(|d| d.to_json()).collect::<Vec<_>>(),
        "matrix": matrix_table(trace, r),
    }))
}
