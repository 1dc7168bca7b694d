//! In-process deployment: every authority, role manager, owner, user and
//! the cloud, wired together with seeded entropy and a simulated clock.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rbks_core::authority::{
    manage_role, pub_cloud_key_gen, revoke_role, system_setup, user_priv_key_gen, BulletinBoard,
    CloudKeys, MasterSecret, ProxyKeySet, PublicParams, RevocationToken, RoleSecrets, UserKeys,
};
use rbks_core::client::{full_dec_batch, trap_gen, PartialCiphertext, SearchSession, Trapdoor};
use rbks_core::cloud::{CloudServer, Rejection};
use rbks_core::hierarchy::{OrgId, RoleHierarchy, RoleId};
use rbks_core::owner::{encrypt, AccessPolicy};
use rbks_core::pairing::{BilinearContext, Engine};
use rbks_core::role_manager::{issue_role_key, update_role_keys, RoleKeyRing};
use rbks_core::telemetry::{self, OpCounts};
use rbks_core::{Error, Result};

pub const CLOUD_ID: &str = "cloud";

/// A user's client state.
#[derive(Clone, Debug)]
pub struct UserAgent<E: Engine> {
    pub keys: BTreeMap<OrgId, UserKeys<E>>,
    pub ring: RoleKeyRing<E>,
    /// Role keys the user was revoked from. A revoked user keeps them and
    /// will try them; they must no longer work.
    pub stale: RoleKeyRing<E>,
}

impl<E: Engine> UserAgent<E> {
    /// Current keys plus stale ones for roles no longer held.
    pub fn everything_held(&self) -> RoleKeyRing<E> {
        let mut all = self.ring.clone();
        for pair in self.stale.iter() {
            if all.get(&pair.role).is_none() {
                all.insert(pair.clone());
            }
        }
        all
    }
}

/// What one query produced, from the client's point of view.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryReport {
    /// Ciphertext id to recovered plaintext.
    pub matches: BTreeMap<u64, Vec<u8>>,
    /// Matches whose payload did not open.
    pub undecryptable: BTreeSet<u64>,
    pub skipped: BTreeMap<u64, Rejection>,
    /// Request-level refusal (replay, freshness, identity).
    pub rejected: Option<Rejection>,
    /// Cloud-side work for the whole request.
    pub cloud_ops: OpCounts,
}

pub struct Deployment<E: Engine> {
    pub ctx: BilinearContext<E>,
    pub pp: PublicParams<E>,
    pub masters: BTreeMap<OrgId, MasterSecret<E>>,
    pub hierarchies: BTreeMap<OrgId, RoleHierarchy>,
    pub secrets: BTreeMap<OrgId, RoleSecrets<E>>,
    /// The authorities' copies of the proxy keys they issued.
    pub proxies: BTreeMap<OrgId, ProxyKeySet<E>>,
    pub cloud_keys: BTreeMap<OrgId, CloudKeys<E>>,
    pub board: BulletinBoard<E>,
    pub cloud: CloudServer<E>,
    pub users: BTreeMap<String, UserAgent<E>>,
    pub rng: ChaCha20Rng,
    pub now: u64,
    last_trapdoor: Option<Trapdoor<E>>,
}

impl<E: Engine> Deployment<E> {
    /// Setup, role management and cloud key generation for every org.
    pub fn new(
        seed: u64,
        hierarchies: Vec<RoleHierarchy>,
        window: u64,
        start: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ctx = BilinearContext::<E>::new();
        let ids: Vec<OrgId> = hierarchies.iter().map(|h| h.org().clone()).collect();
        let (pp, masters) = system_setup(&ctx, &ids, &mut rng)?;
        let mut d = Deployment {
            ctx,
            pp,
            masters,
            hierarchies: BTreeMap::new(),
            secrets: BTreeMap::new(),
            proxies: BTreeMap::new(),
            cloud_keys: BTreeMap::new(),
            board: BulletinBoard::new(),
            cloud: CloudServer::new(window),
            users: BTreeMap::new(),
            rng,
            now: start,
            last_trapdoor: None,
        };
        for h in hierarchies {
            let org = h.org().clone();
            let (secrets, proxy) = manage_role(&d.ctx, &h, &mut d.rng);
            d.board.publish_role_pks(secrets.public_keys());
            d.cloud.proxy.merge(proxy.clone());
            let ck = pub_cloud_key_gen(&d.ctx, &d.masters[&org], CLOUD_ID);
            d.board.publish_cloud(org.clone(), ck.public);
            d.cloud.add_cloud_keys(&ck);
            d.cloud_keys.insert(org.clone(), ck);
            d.proxies.insert(org.clone(), proxy);
            d.secrets.insert(org.clone(), secrets);
            d.hierarchies.insert(org, h);
        }
        Ok(d)
    }

    pub fn hierarchy(&self, org: &OrgId) -> Result<&RoleHierarchy> {
        self.hierarchies
            .get(org)
            .ok_or_else(|| Error::UnknownOrg(org.to_string()))
    }

    /// Registers `user` with every authority and issues keys for `roles`.
    pub fn enroll(&mut self, user: &str, roles: &[RoleId]) -> Result<()> {
        let mut keys = BTreeMap::new();
        for (org, ms) in &self.masters {
            let k = user_priv_key_gen(&self.ctx, ms, user);
            self.board.publish_user(&k);
            keys.insert(org.clone(), k);
        }
        self.users.insert(
            user.to_owned(),
            UserAgent {
                keys,
                ring: RoleKeyRing::new(),
                stale: RoleKeyRing::new(),
            },
        );
        for r in roles {
            self.assign_role(user, r)?;
        }
        Ok(())
    }

    pub fn assign_role(&mut self, user: &str, role: &RoleId) -> Result<()> {
        let secrets = self
            .secrets
            .get(&role.org)
            .ok_or_else(|| Error::UnknownOrg(role.org.to_string()))?;
        let agent = self
            .users
            .get_mut(user)
            .ok_or_else(|| Error::UnknownUser(user.to_owned()))?;
        let us = &agent.keys[&role.org].user_secret;
        agent.ring.insert(issue_role_key(secrets, role, us)?);
        agent.stale.remove(role);
        Ok(())
    }

    pub fn encrypt<S: AsRef<str>>(
        &mut self,
        payload: &[u8],
        keywords: &[S],
        policy: &AccessPolicy,
    ) -> Result<u64> {
        let ct = encrypt(
            &self.pp,
            self.board.cloud_pubs(),
            payload,
            keywords,
            policy,
            self.board.role_pks(),
            &mut self.rng,
        )?;
        Ok(self.cloud.store.insert(ct))
    }

    /// Trapdoor for `user` against `org`'s ciphertexts, using every key the
    /// user has (stale ones included) unless `presented` narrows it.
    pub fn trapdoor<S: AsRef<str>>(
        &mut self,
        user: &str,
        org: &OrgId,
        keywords: &[S],
        presented: Option<&BTreeSet<RoleId>>,
    ) -> Result<(Trapdoor<E>, SearchSession<E>)> {
        let agent = self
            .users
            .get(user)
            .ok_or_else(|| Error::UnknownUser(user.to_owned()))?;
        let keys = agent
            .keys
            .get(org)
            .ok_or_else(|| Error::UnknownOrg(org.to_string()))?;
        let ring = agent.everything_held();
        trap_gen(
            &self.ctx,
            keys,
            &ring,
            presented,
            keywords,
            self.now,
            &mut self.rng,
        )
    }

    /// Trapdoor, cloud search and client decryption.
    pub fn query<S: AsRef<str>>(
        &mut self,
        user: &str,
        org: &OrgId,
        keywords: &[S],
        presented: Option<&BTreeSet<RoleId>>,
    ) -> Result<QueryReport> {
        let (trap, session) = self.trapdoor(user, org, keywords, presented)?;
        let priv_global = self.users[user].keys[org].priv_global;
        let (mut report, pcs) = self.submit(&trap)?;
        let ids: Vec<u64> = report.matches.keys().copied().collect();
        for (id, plain) in ids
            .into_iter()
            .zip(full_dec_batch(&pcs, &priv_global, session))
        {
            match plain {
                Ok(m) => {
                    report.matches.insert(id, m);
                }
                Err(_) => {
                    report.matches.remove(&id);
                    report.undecryptable.insert(id);
                }
            }
        }
        Ok(report)
    }

    /// Sends the previous trapdoor again, unchanged.
    pub fn replay(&mut self) -> Result<QueryReport> {
        let trap = self
            .last_trapdoor
            .clone()
            .ok_or(Error::InvalidEncoding("no earlier trapdoor to replay"))?;
        Ok(self.submit(&trap)?.0)
    }

    fn submit(&mut self, trap: &Trapdoor<E>) -> Result<(QueryReport, Vec<PartialCiphertext<E>>)> {
        self.last_trapdoor = Some(trap.clone());
        let (outcome, cloud_ops) =
            telemetry::measure(|| self.cloud.search(trap, &self.board, self.now));
        let mut report = QueryReport {
            cloud_ops,
            ..QueryReport::default()
        };
        let mut pcs = Vec::new();
        match outcome {
            Ok(outcome) => {
                report.skipped = outcome.skipped;
                for (id, pc) in outcome.matches {
                    report.matches.insert(id, Vec::new());
                    pcs.push(pc);
                }
            }
            Err(Error::Rejected(r)) => report.rejected = Some(r),
            Err(e) => return Err(e),
        }
        Ok((report, pcs))
    }

    /// Role-level revocation: new role secrets, proxy-key update and
    /// re-encryption at the cloud, key updates for every remaining holder.
    /// Users in `revoked` lose `role` but keep their stale key for it.
    /// Returns the token and the ids of the re-encrypted ciphertexts.
    pub fn revoke_role(
        &mut self,
        role: &RoleId,
        revoked: &[String],
    ) -> Result<(RevocationToken<E>, Vec<u64>)> {
        let org = role.org.clone();
        let h = self
            .hierarchies
            .get(&org)
            .ok_or_else(|| Error::UnknownOrg(org.to_string()))?;
        let secrets = self.secrets.get_mut(&org).expect("org has secrets");
        let proxy = self.proxies.get_mut(&org).expect("org has proxy keys");
        let token = revoke_role(h, secrets, proxy, role, &mut self.rng)?;
        self.board.publish_role_pks(secrets.public_keys());
        let reencrypted = self.cloud.apply_revocation(&token, h)?;
        for (name, agent) in self.users.iter_mut() {
            if revoked.contains(name) {
                if let Some(old) = agent.ring.remove(role) {
                    agent.stale.insert(old);
                }
            }
            update_role_keys(&mut agent.ring, &token, h)?;
        }
        Ok((token, reencrypted))
    }

    /// Complete revocation: the user's public key leaves the board.
    pub fn revoke_user(&mut self, user: &str, org: &OrgId) -> Result<()> {
        self.board.revoke_user_complete(org, user)
    }

    pub fn advance(&mut self, seconds: u64) {
        self.now += seconds;
    }
}
