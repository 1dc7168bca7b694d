//! The `rbks` command line. Every party keeps its files under one state
//! directory (`--home`, default `./rbks-state`):
//!
//! ```text
//! public/params.json  public/board.json  public/hierarchy-<org>.txt
//! sa/<org>/{master,role-secrets,proxy}.json
//! cloud/keys-<org>.json  cloud/proxy-<org>.json  cloud/store/  cloud/replay.json
//! users/<user>/keys-<org>.json  users/<user>/ring.json  users/<user>/sessions/
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rbks_core::authority::{
    manage_role, pub_cloud_key_gen, revoke_role, system_setup, user_priv_key_gen, BulletinBoard,
    CloudKeys, MasterSecret, ProxyKeySet, PublicParams, RevocationToken, RoleSecrets, UserKeys,
};
use rbks_core::client::{full_dec_batch, trap_gen, PartialCiphertext, SearchSession};
use rbks_core::cloud::{CiphertextStore, CloudServer, Rejection, DEFAULT_REPLAY_WINDOW};
use rbks_core::hierarchy::{OrgId, RoleHierarchy, RoleId};
use rbks_core::owner::{encrypt, AccessPolicy};
use rbks_core::pairing::{BilinearContext, Engine, SecurityLevel};
use rbks_core::role_manager::{issue_role_key, update_role_keys, RoleKeyRing};
use rbks_core::wire::{
    decode_ciphertext, decode_trapdoor, encode_ciphertext, encode_trapdoor, peek_key_file,
    read_key_file, write_key_file, KeyFile,
};
use rbks_core::with_engine;
use serde::{Deserialize, Serialize};

use crate::bench::{self, BenchParams, Phase};
use crate::error::{HarnessError, Result};
use crate::random::{random_scenario, Limits};
use crate::scenario::{run_scenario, Scenario};
use crate::sim::CLOUD_ID;

#[derive(Debug, Parser)]
#[command(
    name = "rbks",
    version,
    about = "Role-based authorized keyword search over encrypted data"
)]
pub struct Cli {
    /// State directory shared by the simulated parties.
    #[arg(long, global = true, env = "RBKS_HOME", default_value = "rbks-state")]
    pub home: PathBuf,
    /// Seed for all randomness; system entropy when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// System authority operations.
    #[command(subcommand)]
    Sa(SaCmd),
    /// Role manager operations.
    #[command(subcommand)]
    Rm(RmCmd),
    /// Data owner operations.
    #[command(subcommand)]
    Owner(OwnerCmd),
    /// User operations.
    #[command(subcommand)]
    User(UserCmd),
    /// Cloud operations.
    #[command(subcommand)]
    Cloud(CloudCmd),
    /// Scenario files.
    #[command(subcommand)]
    Demo(DemoCmd),
    /// Time one protocol phase and count its operations.
    Bench(BenchArgs),
}

#[derive(Debug, Subcommand)]
pub enum SaCmd {
    /// Joint setup of all authorities (group key agreement included).
    Setup {
        #[arg(long, value_delimiter = ',', required = true)]
        orgs: Vec<String>,
        #[arg(long, default_value = "bls12-381")]
        engine: String,
    },
    /// Role secrets and proxy keys for one hierarchy file.
    ManageRoles {
        #[arg(long)]
        org: String,
        #[arg(long)]
        hierarchy: PathBuf,
    },
    /// Cloud key pair for one authority.
    KeygenCloud {
        #[arg(long)]
        org: String,
    },
    /// Keys for `user` from every authority (or only `--org`).
    KeygenUser {
        #[arg(long)]
        user: String,
        #[arg(long)]
        org: Option<String>,
    },
    /// Complete revocation: withdraws the user's public key.
    RevokeUser {
        #[arg(long)]
        org: String,
        #[arg(long)]
        user: String,
    },
    /// Role-level revocation; writes the token for the cloud and role managers.
    RevokeRole {
        #[arg(long)]
        role: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum RmCmd {
    /// Issues role keys for a non-root role.
    AssignRole {
        #[arg(long)]
        user: String,
        #[arg(long)]
        role: String,
    },
    /// Applies a revocation token to every user's role keys; `--revoked`
    /// users lose the revoked role instead.
    PushUpdates {
        #[arg(long)]
        token: PathBuf,
        #[arg(long, value_delimiter = ',')]
        revoked: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum OwnerCmd {
    /// Encrypts a file under a role policy and keyword set.
    Encrypt {
        /// Comma-separated `org/role` list.
        #[arg(long, value_delimiter = ',', required = true)]
        policy: Vec<String>,
        /// Defaults to the org of the first policy role.
        #[arg(long)]
        owner: Option<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        keywords: Vec<String>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum UserCmd {
    /// Builds a trapdoor; the session secret stays in the user's directory.
    Search {
        #[arg(long)]
        user: String,
        #[arg(long)]
        org: String,
        #[arg(long, value_delimiter = ',', required = true)]
        keywords: Vec<String>,
        /// Roles to present; all held roles when absent.
        #[arg(long, value_delimiter = ',')]
        roles: Option<Vec<String>>,
        #[arg(long)]
        now: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finishes decryption of `cloud search` results.
    Decrypt {
        #[arg(long)]
        user: String,
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum CloudCmd {
    /// Adds an encrypted document to the store.
    Store {
        #[arg(long)]
        input: PathBuf,
    },
    /// Authenticates a trapdoor, searches, and partially decrypts matches.
    Search {
        #[arg(long)]
        trapdoor: PathBuf,
        #[arg(long)]
        now: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Per-operation counts and wall time as CSV.
        #[arg(long)]
        telemetry: Option<PathBuf>,
    },
    /// Updates proxy keys and re-encrypts affected ciphertexts.
    Reencrypt {
        #[arg(long)]
        token: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum DemoCmd {
    /// Runs a scenario file and checks every expectation.
    Run {
        file: PathBuf,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Prints a randomized scenario with computed expectations.
    Generate {
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long, default_value = "bls12-381")]
        engine: String,
    },
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// enc, trapgen, authentication, keysearch, partialdec, decryption or all.
    pub phase: String,
    /// |Γ|
    #[arg(long, default_value_t = 5)]
    pub gamma: usize,
    /// |Γ_Φ|; defaults to |Γ|.
    #[arg(long)]
    pub orgs: Option<usize>,
    /// |S|; defaults to |Γ| (or |Γ_Φ| with --via-ancestors).
    #[arg(long)]
    pub roles: Option<usize>,
    /// The user holds ancestors of the policy roles (proxy-key path).
    #[arg(long)]
    pub via_ancestors: bool,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Run |Γ| = |Γ_Φ| = |S| = 1..=gamma instead of one size.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value = "bls12-381")]
    pub engine: String,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Runs one command; returns what to print.
pub fn run(cli: Cli) -> Result<String> {
    let mut rng = match cli.seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    };
    let home = cli.home;
    match cli.command {
        Command::Sa(SaCmd::Setup { orgs, engine }) => {
            let level = parse_level(&engine)?;
            with_engine!(level, E => setup::<E>(&home, &orgs, &mut rng))
        }
        Command::Demo(cmd) => demo(cmd),
        Command::Bench(args) => run_bench(args),
        other => {
            let level = peek_key_file(&State::new(&home).params_path()).map_err(|e| {
                usage(format!(
                    "no deployment under {} ({e}); run `sa setup` first",
                    home.display()
                ))
            })?;
            with_engine!(level, E => State::new(&home).dispatch::<E>(other, &mut rng))
        }
    }
}

fn usage(msg: impl Into<String>) -> HarnessError {
    HarnessError::Usage(msg.into())
}

fn parse_level(s: &str) -> Result<SecurityLevel> {
    s.parse()
        .map_err(|_| usage(format!("unknown engine {s:?}; use bls12-381 or type-a")))
}

fn parse_role(s: &str) -> Result<RoleId> {
    s.parse()
        .map_err(|_| usage(format!("role {s:?} is not `org/name`")))
}

fn now_or(now: Option<u64>) -> u64 {
    now.unwrap_or_else(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .expect("clock after 1970")
            .as_secs()
    })
}

fn setup<E: Engine>(home: &Path, orgs: &[String], rng: &mut ChaCha20Rng) -> Result<String> {
    let st = State::new(home);
    if st.params_path().exists() {
        return Err(usage(format!(
            "{} already holds a deployment",
            home.display()
        )));
    }
    let ctx = BilinearContext::<E>::new();
    let ids: Vec<OrgId> = orgs.iter().map(OrgId::new).collect();
    let (pp, masters) = system_setup(&ctx, &ids, rng)?;
    write_key_file(
        &st.params_path(),
        &KeyFile::new(E::LEVEL, "public-params", pp),
    )?;
    for (org, ms) in masters {
        write_key_file(
            &st.sa(&org).join("master.json"),
            &KeyFile::new(E::LEVEL, "master-secret", ms).with_org(&org),
        )?;
    }
    st.save_board(&BulletinBoard::<E>::new())?;
    Ok(format!(
        "set up {} authorities on {} in {}",
        orgs.len(),
        E::NAME,
        home.display()
    ))
}

/// Paths and typed accessors for the state directory.
struct State {
    home: PathBuf,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct SearchResults<E: Engine> {
    user: String,
    org: OrgId,
    trapdoor_digest: String,
    matches: Vec<ResultEntry<E>>,
    skipped: BTreeMap<u64, Rejection>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct ResultEntry<E: Engine> {
    id: u64,
    partial: PartialCiphertext<E>,
}

impl State {
    fn new(home: &Path) -> Self {
        Self {
            home: home.to_owned(),
        }
    }

    fn params_path(&self) -> PathBuf {
        self.home.join("public/params.json")
    }

    fn board_path(&self) -> PathBuf {
        self.home.join("public/board.json")
    }

    fn hierarchy_path(&self, org: &OrgId) -> PathBuf {
        self.home.join(format!("public/hierarchy-{org}.txt"))
    }

    fn sa(&self, org: &OrgId) -> PathBuf {
        self.home.join("sa").join(org.as_str())
    }

    fn cloud(&self) -> PathBuf {
        self.home.join("cloud")
    }

    fn user(&self, user: &str) -> PathBuf {
        self.home.join("users").join(user)
    }

    fn params<E: Engine>(&self) -> Result<PublicParams<E>> {
        Ok(read_key_file::<E, _>(&self.params_path(), "public-params")?.body)
    }

    fn board<E: Engine>(&self) -> Result<BulletinBoard<E>> {
        Ok(read_key_file::<E, _>(&self.board_path(), "bulletin-board")?.body)
    }

    fn save_board<E: Engine>(&self, board: &BulletinBoard<E>) -> Result<()> {
        Ok(write_key_file(
            &self.board_path(),
            &KeyFile::new(E::LEVEL, "bulletin-board", board),
        )?)
    }

    fn hierarchy(&self, org: &OrgId) -> Result<RoleHierarchy> {
        let text = fs::read_to_string(self.hierarchy_path(org)).map_err(|_| {
            usage(format!(
                "no hierarchy for {org}; run `sa manage-roles` first"
            ))
        })?;
        Ok(RoleHierarchy::parse(&text, Some(org))?)
    }

    fn master<E: Engine>(&self, org: &OrgId) -> Result<MasterSecret<E>> {
        let path = self.sa(org).join("master.json");
        if !path.exists() {
            return Err(usage(format!("unknown organization {org}")));
        }
        Ok(read_key_file::<E, _>(&path, "master-secret")?.body)
    }

    fn role_secrets<E: Engine>(&self, org: &OrgId) -> Result<RoleSecrets<E>> {
        Ok(read_key_file::<E, _>(&self.sa(org).join("role-secrets.json"), "role-secrets")?.body)
    }

    fn orgs(&self) -> Result<Vec<OrgId>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.home.join("sa"))? {
            out.push(OrgId::new(entry?.file_name().to_string_lossy()));
        }
        out.sort();
        Ok(out)
    }

    fn user_keys<E: Engine>(&self, user: &str, org: &OrgId) -> Result<UserKeys<E>> {
        let path = self.user(user).join(format!("keys-{org}.json"));
        if !path.exists() {
            return Err(usage(format!(
                "{user} has no keys from {org}; run `sa keygen-user`"
            )));
        }
        Ok(read_key_file::<E, _>(&path, "user-keys")?.body)
    }

    fn ring<E: Engine>(&self, user: &str) -> Result<RoleKeyRing<E>> {
        let path = self.user(user).join("ring.json");
        if path.exists() {
            Ok(read_key_file::<E, _>(&path, "role-keys")?.body)
        } else {
            Ok(RoleKeyRing::new())
        }
    }

    fn save_ring<E: Engine>(&self, user: &str, ring: &RoleKeyRing<E>) -> Result<()> {
        let file = KeyFile::new(E::LEVEL, "role-keys", ring).with_subject(user);
        Ok(write_key_file(&self.user(user).join("ring.json"), &file)?)
    }

    fn users(&self) -> Result<Vec<String>> {
        let dir = self.home.join("users");
        let mut out = Vec::new();
        if dir.exists() {
            for entry in fs::read_dir(dir)? {
                out.push(entry?.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }

    fn token<E: Engine>(&self, path: &Path) -> Result<RevocationToken<E>> {
        Ok(read_key_file::<E, _>(path, "revocation-token")?.body)
    }

    /// The cloud as persisted: keys, proxy keys, store and replay cache.
    fn load_cloud<E: Engine>(&self) -> Result<CloudServer<E>> {
        let mut cloud = CloudServer::new(DEFAULT_REPLAY_WINDOW);
        let dir = self.cloud();
        if dir.exists() {
            for entry in fs::read_dir(&dir)? {
                let path = entry?.path();
                let name = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .unwrap_or_default()
                    .to_owned();
                if name.starts_with("keys-") {
                    let keys: CloudKeys<E> = read_key_file::<E, _>(&path, "cloud-keys")?.body;
                    cloud.add_cloud_keys(&keys);
                } else if name.starts_with("proxy-") {
                    cloud
                        .proxy
                        .merge(read_key_file::<E, ProxyKeySet<E>>(&path, "proxy-keys")?.body);
                }
            }
            cloud.store = CiphertextStore::load(&dir.join("store"))?;
            let replay = dir.join("replay.json");
            if replay.exists() {
                cloud
                    .cache
                    .import(&serde_json::from_slice(&fs::read(replay)?)?)?;
            }
        }
        Ok(cloud)
    }

    fn dispatch<E: Engine>(&self, cmd: Command, rng: &mut ChaCha20Rng) -> Result<String> {
        let ctx = BilinearContext::<E>::new();
        match cmd {
            Command::Sa(SaCmd::Setup { .. }) | Command::Demo(_) | Command::Bench(_) => {
                unreachable!("handled by run")
            }
            Command::Sa(SaCmd::ManageRoles { org, hierarchy }) => {
                let org = OrgId::new(org);
                self.master::<E>(&org)?;
                let text = fs::read_to_string(&hierarchy)?;
                let h = RoleHierarchy::parse(&text, Some(&org))?;
                if h.org() != &org {
                    return Err(usage(format!(
                        "hierarchy file is for {}, not {org}",
                        h.org()
                    )));
                }
                let (secrets, proxy) = manage_role(&ctx, &h, rng);
                fs::write(self.hierarchy_path(&org), h.to_text())?;
                let mut board = self.board::<E>()?;
                board.publish_role_pks(secrets.public_keys());
                self.save_board(&board)?;
                let sa = self.sa(&org);
                write_key_file(
                    &sa.join("role-secrets.json"),
                    &KeyFile::new(E::LEVEL, "role-secrets", &secrets).with_org(&org),
                )?;
                write_key_file(
                    &sa.join("proxy.json"),
                    &KeyFile::new(E::LEVEL, "proxy-keys", &proxy).with_org(&org),
                )?;
                let n = proxy.len();
                write_key_file(
                    &self.cloud().join(format!("proxy-{org}.json")),
                    &KeyFile::new(E::LEVEL, "proxy-keys", proxy).with_org(&org),
                )?;
                Ok(format!(
                    "{org}: {} roles, {n} proxy keys delivered to the cloud",
                    h.len()
                ))
            }
            Command::Sa(SaCmd::KeygenCloud { org }) => {
                let org = OrgId::new(org);
                let keys = pub_cloud_key_gen(&ctx, &self.master::<E>(&org)?, CLOUD_ID);
                let mut board = self.board::<E>()?;
                board.publish_cloud(org.clone(), keys.public);
                self.save_board(&board)?;
                write_key_file(
                    &self.cloud().join(format!("keys-{org}.json")),
                    &KeyFile::new(E::LEVEL, "cloud-keys", keys).with_org(&org),
                )?;
                Ok(format!("{org}: cloud keys issued"))
            }
            Command::Sa(SaCmd::KeygenUser { user, org }) => {
                let orgs = match org {
                    Some(o) => vec![OrgId::new(o)],
                    None => self.orgs()?,
                };
                let mut board = self.board::<E>()?;
                for org in &orgs {
                    let keys = user_priv_key_gen(&ctx, &self.master::<E>(org)?, &user);
                    board.publish_user(&keys);
                    write_key_file(
                        &self.user(&user).join(format!("keys-{org}.json")),
                        &KeyFile::new(E::LEVEL, "user-keys", keys)
                            .with_org(org)
                            .with_subject(&user),
                    )?;
                }
                self.save_board(&board)?;
                Ok(format!("{user}: keys from {} authorities", orgs.len()))
            }
            Command::Sa(SaCmd::RevokeUser { org, user }) => {
                let org = OrgId::new(org);
                let mut board = self.board::<E>()?;
                board.revoke_user_complete(&org, &user)?;
                self.save_board(&board)?;
                Ok(format!("{user} revoked from {org}"))
            }
            Command::Sa(SaCmd::RevokeRole { role, out }) => {
                let role = parse_role(&role)?;
                let org = role.org.clone();
                let h = self.hierarchy(&org)?;
                let mut secrets = self.role_secrets::<E>(&org)?;
                let sa = self.sa(&org);
                let mut proxy: ProxyKeySet<E> =
                    read_key_file::<E, _>(&sa.join("proxy.json"), "proxy-keys")?.body;
                let token = revoke_role(&h, &mut secrets, &mut proxy, &role, rng)?;
                write_key_file(
                    &sa.join("role-secrets.json"),
                    &KeyFile::new(E::LEVEL, "role-secrets", &secrets).with_org(&org),
                )?;
                write_key_file(
                    &sa.join("proxy.json"),
                    &KeyFile::new(E::LEVEL, "proxy-keys", &proxy).with_org(&org),
                )?;
                let mut board = self.board::<E>()?;
                board.publish_role_pks(secrets.public_keys());
                self.save_board(&board)?;
                write_key_file(
                    &out,
                    &KeyFile::new(E::LEVEL, "revocation-token", token).with_org(&org),
                )?;
                Ok(format!(
                    "{role} revoked; token written to {}",
                    out.display()
                ))
            }
            Command::Rm(RmCmd::AssignRole { user, role }) => {
                let role = parse_role(&role)?;
                let keys = self.user_keys::<E>(&user, &role.org)?;
                let secrets = self.role_secrets::<E>(&role.org)?;
                let mut ring = self.ring::<E>(&user)?;
                ring.insert(issue_role_key(&secrets, &role, &keys.user_secret)?);
                self.save_ring(&user, &ring)?;
                Ok(format!("{user} now holds {} roles", ring.len()))
            }
            Command::Rm(RmCmd::PushUpdates { token, revoked }) => {
                let token = self.token::<E>(&token)?;
                let h = self.hierarchy(&token.role.org)?;
                let mut changed = 0;
                for user in self.users()? {
                    let mut ring = self.ring::<E>(&user)?;
                    if revoked.contains(&user) {
                        ring.remove(&token.role);
                    }
                    changed += update_role_keys(&mut ring, &token, &h)?;
                    self.save_ring(&user, &ring)?;
                }
                Ok(format!("{changed} role keys updated"))
            }
            Command::Owner(OwnerCmd::Encrypt {
                policy,
                owner,
                keywords,
                input,
                out,
            }) => {
                let roles = policy
                    .iter()
                    .map(|r| parse_role(r))
                    .collect::<Result<Vec<_>>>()?;
                let owner = match owner {
                    Some(o) => OrgId::new(o),
                    None => roles[0].org.clone(),
                };
                let policy = AccessPolicy::new(roles, owner)?;
                let board = self.board::<E>()?;
                let m = fs::read(&input)?;
                let ct = encrypt(
                    &self.params::<E>()?,
                    board.cloud_pubs(),
                    &m,
                    &keywords,
                    &policy,
                    board.role_pks(),
                    rng,
                )?;
                let blob = encode_ciphertext(&ct);
                fs::write(&out, &blob)?;
                Ok(format!(
                    "{} bytes -> {} ({} byte archive)",
                    m.len(),
                    out.display(),
                    blob.len()
                ))
            }
            Command::User(UserCmd::Search {
                user,
                org,
                keywords,
                roles,
                now,
                out,
            }) => {
                let org = OrgId::new(org);
                let keys = self.user_keys::<E>(&user, &org)?;
                let ring = self.ring::<E>(&user)?;
                let presented = roles
                    .map(|rs| {
                        rs.iter()
                            .map(|r| parse_role(r))
                            .collect::<Result<BTreeSet<_>>>()
                    })
                    .transpose()?;
                let (trap, session) = trap_gen(
                    &ctx,
                    &keys,
                    &ring,
                    presented.as_ref(),
                    &keywords,
                    now_or(now),
                    rng,
                )?;
                let digest = hex::encode(trap.digest());
                let sessions = self.user(&user).join("sessions");
                fs::create_dir_all(&sessions)?;
                fs::write(
                    sessions.join(format!("{digest}.session")),
                    session.to_local_bytes(),
                )?;
                fs::write(&out, encode_trapdoor(&trap))?;
                Ok(format!(
                    "trapdoor {digest} with {} roles -> {}",
                    trap.roles.len(),
                    out.display()
                ))
            }
            Command::User(UserCmd::Decrypt {
                user,
                results,
                out_dir,
            }) => {
                let results: SearchResults<E> = serde_json::from_slice(&fs::read(&results)?)?;
                if results.user != user {
                    return Err(usage(format!("results belong to {}", results.user)));
                }
                let session_path = self
                    .user(&user)
                    .join("sessions")
                    .join(format!("{}.session", results.trapdoor_digest));
                let session = SearchSession::<E>::from_local_bytes(
                    &fs::read(&session_path)
                        .map_err(|_| usage("no open session for these results"))?,
                )?;
                let keys = self.user_keys::<E>(&user, &results.org)?;
                let pcs: Vec<_> = results.matches.iter().map(|e| e.partial.clone()).collect();
                fs::create_dir_all(&out_dir)?;
                let mut lines = Vec::new();
                for (entry, plain) in
                    results
                        .matches
                        .iter()
                        .zip(full_dec_batch(&pcs, &keys.priv_global, session))
                {
                    let path = out_dir.join(format!("{}.bin", entry.id));
                    fs::write(&path, plain?)?;
                    lines.push(format!("document {} -> {}", entry.id, path.display()));
                }
                fs::remove_file(session_path)?;
                if lines.is_empty() {
                    lines.push("no matching documents".into());
                }
                Ok(lines.join("\n"))
            }
            Command::Cloud(CloudCmd::Store { input }) => {
                let ct = decode_ciphertext::<E>(&fs::read(&input)?)?;
                let dir = self.cloud().join("store");
                let mut store = CiphertextStore::<E>::load(&dir)?;
                let id = store.insert_persisted(&dir, ct)?;
                Ok(format!("stored as document {id}"))
            }
            Command::Cloud(CloudCmd::Search {
                trapdoor,
                now,
                out,
                telemetry,
            }) => {
                let trap = decode_trapdoor::<E>(&fs::read(&trapdoor)?)?;
                let mut cloud = self.load_cloud::<E>()?;
                let board = self.board::<E>()?;
                let result = cloud.search(&trap, &board, now_or(now));
                fs::write(
                    self.cloud().join("replay.json"),
                    serde_json::to_vec(&cloud.cache.export())?,
                )?;
                if let Some(path) = telemetry {
                    fs::write(path, cloud.telemetry.to_csv())?;
                }
                let outcome = result?;
                let n = outcome.matches.len();
                let results = SearchResults::<E> {
                    user: trap.user_id.clone(),
                    org: trap.org.clone(),
                    trapdoor_digest: hex::encode(trap.digest()),
                    matches: outcome
                        .matches
                        .into_iter()
                        .map(|(id, partial)| ResultEntry { id, partial })
                        .collect(),
                    skipped: outcome.skipped,
                };
                fs::write(&out, serde_json::to_vec_pretty(&results)?)?;
                Ok(format!(
                    "{n} matches, {} skipped -> {}",
                    results.skipped.len(),
                    out.display()
                ))
            }
            Command::Cloud(CloudCmd::Reencrypt { token }) => {
                let token = self.token::<E>(&token)?;
                let org = token.role.org.clone();
                let h = self.hierarchy(&org)?;
                let proxy_path = self.cloud().join(format!("proxy-{org}.json"));
                let mut proxy: ProxyKeySet<E> =
                    read_key_file::<E, _>(&proxy_path, "proxy-keys")?.body;
                proxy.apply_revocation(&token, &h)?;
                write_key_file(
                    &proxy_path,
                    &KeyFile::new(E::LEVEL, "proxy-keys", proxy).with_org(&org),
                )?;
                let dir = self.cloud().join("store");
                let mut store = CiphertextStore::<E>::load(&dir)?;
                let ids = rbks_core::cloud::reencrypt_role(&mut store, &token, &h)?;
                store.save(&dir)?;
                Ok(format!("re-encrypted {} documents", ids.len()))
            }
        }
    }
}

fn demo(cmd: DemoCmd) -> Result<String> {
    match cmd {
        DemoCmd::Run { file, json } => {
            let report = run_scenario(&Scenario::load(&file)?)?;
            if json {
                Ok(serde_json::to_string_pretty(&report)?)
            } else {
                Ok(format!("{}all expectations met", report.summary()))
            }
        }
        DemoCmd::Generate { index, engine } => {
            parse_level(&engine)?;
            Ok(random_scenario(index, &engine, &Limits::default()).to_toml())
        }
    }
}

fn run_bench(a: BenchArgs) -> Result<String> {
    let level = parse_level(&a.engine)?;
    let phases: Vec<Phase> = if a.phase == "all" {
        Phase::ALL.to_vec()
    } else {
        vec![a.phase.parse()?]
    };
    let reports = if a.sweep {
        bench::sweep(level, &phases, 1..=a.gamma, a.trials)?
    } else {
        let orgs = a.orgs.unwrap_or(a.gamma);
        let params = BenchParams {
            gamma: a.gamma,
            orgs,
            roles: a
                .roles
                .unwrap_or(if a.via_ancestors { orgs } else { a.gamma }),
            via_ancestors: a.via_ancestors,
            trials: a.trials,
            seed: 0,
        };
        bench::bench_phases_at(level, &phases, &params)?
    };
    let csv = bench::to_csv(&reports);
    if let Some(path) = a.csv {
        fs::write(path, &csv)?;
    }
    Ok(csv.trim_end().to_owned())
}
