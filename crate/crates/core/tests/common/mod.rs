#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rbks_core::authority::{
    manage_role, pub_cloud_key_gen, system_setup, user_priv_key_gen, BulletinBoard, CloudKeys,
    MasterSecret, PublicParams, RoleSecrets, UserKeys,
};
use rbks_core::client::{full_dec_batch, trap_gen, SearchSession, Trapdoor};
use rbks_core::cloud::{CloudServer, SearchOutcome, DEFAULT_REPLAY_WINDOW};
use rbks_core::hierarchy::{build_hierarchy, OrgId, RoleHierarchy, RoleId};
use rbks_core::owner::{encrypt, AccessPolicy};
use rbks_core::pairing::{BilinearContext, Engine};
use rbks_core::role_manager::{issue_role_key, RoleKeyRing};
use rbks_core::Result;

pub const NOW: u64 = 1_700_000_000;

pub struct User<E: Engine> {
    pub keys: BTreeMap<OrgId, UserKeys<E>>,
    pub ring: RoleKeyRing<E>,
}

/// Every party of a deployment in one place.
pub struct World<E: Engine> {
    pub ctx: BilinearContext<E>,
    pub pp: PublicParams<E>,
    pub masters: BTreeMap<OrgId, MasterSecret<E>>,
    pub hierarchies: BTreeMap<OrgId, RoleHierarchy>,
    pub secrets: BTreeMap<OrgId, RoleSecrets<E>>,
    pub cloud_keys: BTreeMap<OrgId, CloudKeys<E>>,
    pub board: BulletinBoard<E>,
    pub cloud: CloudServer<E>,
    pub users: BTreeMap<String, User<E>>,
    pub rng: ChaCha20Rng,
}

/// (org, root, edges).
pub type OrgDef<'a> = (&'a str, &'a str, &'a [(&'a str, &'a str)]);

impl<E: Engine> World<E> {
    pub fn new(seed: u64, orgs: &[OrgDef<'_>]) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ctx = BilinearContext::<E>::new();
        let ids: Vec<OrgId> = orgs.iter().map(|(o, _, _)| OrgId::new(*o)).collect();
        let (pp, masters) = system_setup(&ctx, &ids, &mut rng).unwrap();
        let mut cloud = CloudServer::new(DEFAULT_REPLAY_WINDOW);
        let mut board = BulletinBoard::new();
        let mut hierarchies = BTreeMap::new();
        let mut secrets = BTreeMap::new();
        let mut cloud_keys = BTreeMap::new();
        for (org, root, edges) in orgs {
            let id = OrgId::new(*org);
            let h = build_hierarchy(&id, root, edges).unwrap();
            let (s, proxy) = manage_role(&ctx, &h, &mut rng);
            board.publish_role_pks(s.public_keys());
            cloud.proxy.merge(proxy);
            let ck = pub_cloud_key_gen(&ctx, &masters[&id], "cloud");
            board.publish_cloud(id.clone(), ck.public);
            cloud.add_cloud_keys(&ck);
            cloud_keys.insert(id.clone(), ck);
            hierarchies.insert(id.clone(), h);
            secrets.insert(id, s);
        }
        World {
            ctx,
            pp,
            masters,
            hierarchies,
            secrets,
            cloud_keys,
            board,
            cloud,
            users: BTreeMap::new(),
            rng,
        }
    }

    /// A two-org deployment: a clinic and a lab, each with a small tree.
    pub fn two_orgs(seed: u64) -> Self {
        Self::new(
            seed,
            &[
                (
                    "clinic",
                    "rr",
                    &[
                        ("rr", "head"),
                        ("head", "doctor"),
                        ("head", "nurse"),
                        ("doctor", "intern"),
                    ],
                ),
                (
                    "lab",
                    "rr",
                    &[
                        ("rr", "director"),
                        ("director", "researcher"),
                        ("researcher", "assistant"),
                    ],
                ),
            ],
        )
    }

    pub fn role(org: &str, name: &str) -> RoleId {
        RoleId::new(org, name)
    }

    /// Enrols `user` with every authority and issues keys for `roles`.
    pub fn enroll(&mut self, user: &str, roles: &[RoleId]) {
        let mut keys = BTreeMap::new();
        for (org, ms) in &self.masters {
            let k = user_priv_key_gen(&self.ctx, ms, user);
            self.board.publish_user(&k);
            keys.insert(org.clone(), k);
        }
        let ring = roles
            .iter()
            .map(|r| issue_role_key(&self.secrets[&r.org], r, &keys[&r.org].user_secret).unwrap())
            .collect();
        self.users.insert(user.to_owned(), User { keys, ring });
    }

    pub fn policy(roles: &[RoleId], owner: &str) -> AccessPolicy {
        AccessPolicy::new(roles.iter().cloned(), OrgId::new(owner)).unwrap()
    }

    pub fn store(&mut self, m: &[u8], keywords: &[&str], policy: &AccessPolicy) -> u64 {
        let ct = encrypt(
            &self.pp,
            self.board.cloud_pubs(),
            m,
            keywords,
            policy,
            self.board.role_pks(),
            &mut self.rng,
        )
        .unwrap();
        self.cloud.store.insert(ct)
    }

    pub fn trapdoor(
        &mut self,
        user: &str,
        org: &str,
        keywords: &[&str],
        presented: Option<&BTreeSet<RoleId>>,
        now: u64,
    ) -> (Trapdoor<E>, SearchSession<E>) {
        let u = &self.users[user];
        trap_gen(
            &self.ctx,
            &u.keys[&OrgId::new(org)],
            &u.ring,
            presented,
            keywords,
            now,
            &mut self.rng,
        )
        .unwrap()
    }

    /// Full query: trapdoor, cloud search, client decryption.
    pub fn query(
        &mut self,
        user: &str,
        org: &str,
        keywords: &[&str],
    ) -> Result<(SearchOutcome<E>, Vec<Vec<u8>>)> {
        let (trap, session) = self.trapdoor(user, org, keywords, None, NOW);
        let outcome = self.cloud.search(&trap, &self.board, NOW)?;
        let pcs: Vec<_> = outcome.matches.iter().map(|(_, pc)| pc.clone()).collect();
        let priv_global = self.users[user].keys[&OrgId::new(org)].priv_global;
        let plain = full_dec_batch(&pcs, &priv_global, session)
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok((outcome, plain))
    }
}
