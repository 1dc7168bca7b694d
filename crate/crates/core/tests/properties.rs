use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rbks_core::authority::{manage_role, revoke_role};
use rbks_core::hierarchy::{OrgId, RoleHierarchy, RoleId};
use rbks_core::pairing::{
    pair, BilinearContext, Bls12Paired, Engine, G1Element, GtElement, Scalar, TypeA,
};

type E = Bls12Paired;

/// Random rooted DAG on `n` roles: role `i > 0` gets one to three parents
/// drawn from roles `< i`, so every role is reachable and there is no cycle.
fn dag() -> impl Strategy<Value = Vec<(usize, usize)>> {
    (2usize..14).prop_flat_map(|n| {
        let per_node: Vec<_> = (1..n)
            .map(|i| proptest::collection::btree_set(0..i, 1..=3.min(i)))
            .collect();
        per_node.prop_map(|sets| {
            sets.into_iter()
                .enumerate()
                .flat_map(|(i, ps)| ps.into_iter().map(move |p| (p, i + 1)))
                .collect()
        })
    })
}

fn name(i: usize) -> String {
    format!("r{i}")
}

fn build(edges: &[(usize, usize)]) -> RoleHierarchy {
    let names: Vec<(String, String)> = edges.iter().map(|(p, c)| (name(*p), name(*c))).collect();
    let refs: Vec<(&str, &str)> = names
        .iter()
        .map(|(p, c)| (p.as_str(), c.as_str()))
        .collect();
    RoleHierarchy::build(&OrgId::new("k"), "r0", &[], &refs).unwrap()
}

/// Union of the nodes on every root-to-`target` path, by explicit path
/// enumeration.
fn path_oracle(edges: &[(usize, usize)], target: usize) -> BTreeSet<usize> {
    fn walk(
        node: usize,
        target: usize,
        edges: &[(usize, usize)],
        path: &mut Vec<usize>,
        out: &mut BTreeSet<usize>,
    ) {
        path.push(node);
        if node == target {
            out.extend(path.iter().copied());
        } else {
            for (_, c) in edges.iter().filter(|(p, _)| *p == node) {
                walk(*c, target, edges, path, out);
            }
        }
        path.pop();
    }
    let mut out = BTreeSet::new();
    walk(0, target, edges, &mut Vec::new(), &mut out);
    out
}

fn nodes(edges: &[(usize, usize)]) -> usize {
    edges.iter().map(|(_, c)| *c).max().unwrap_or(0) + 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ancestor_sets_match_path_enumeration(edges in dag()) {
        let h = build(&edges);
        for i in 0..nodes(&edges) {
            let role = RoleId::new("k", name(i));
            let got: BTreeSet<RoleId> = h.ancestor_set(&role).unwrap().members;
            let want: BTreeSet<RoleId> = path_oracle(&edges, i).into_iter().map(|j| RoleId::new("k", name(j))).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn qualification_is_upward_closed(edges in dag()) {
        let h = build(&edges);
        let n = nodes(&edges);
        for target in 0..n {
            let t = RoleId::new("k", name(target));
            for (p, c) in &edges {
                let (p, c) = (RoleId::new("k", name(*p)), RoleId::new("k", name(*c)));
                if h.is_qualified(&c, &t).unwrap() {
                    prop_assert!(h.is_qualified(&p, &t).unwrap());
                }
            }
            prop_assert!(h.is_qualified(&t, &t).unwrap());
            prop_assert!(h.is_qualified(h.root(), &t).unwrap());
        }
    }

    #[test]
    fn text_form_round_trips(edges in dag()) {
        let h = build(&edges);
        prop_assert_eq!(RoleHierarchy::parse(&h.to_text(), None).unwrap(), h);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn role_invariants_survive_revocation_sequences(
        edges in dag(),
        picks in proptest::collection::vec(any::<prop::sample::Index>(), 1..5),
        seed in any::<u64>(),
    ) {
        let ctx = BilinearContext::<E>::new();
        let h = build(&edges);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (mut secrets, mut proxy) = manage_role(&ctx, &h, &mut rng);
        let revocable: Vec<RoleId> = h.roles().filter(|r| *r != h.root()).cloned().collect();
        for pick in picks {
            let role = pick.get(&revocable);
            revoke_role(&h, &mut secrets, &mut proxy, role, &mut rng).unwrap();
            for (role, rec) in &secrets.records {
                prop_assert_eq!(rec.pk, ctx.g().pow(&rec.rs));
                let product: Scalar<E> = h.ancestor_set(role).unwrap().members.iter().map(|r| secrets.params[r]).product();
                prop_assert_eq!(rec.rs, product);
            }
            for (held, target, key) in proxy.iter() {
                prop_assert_eq!(*key * secrets.params[held], secrets.records[target].rs);
            }
        }
    }
}

fn bilinearity_trials<En: Engine>(trials: usize, seed: u64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g = G1Element::<En>::generator();
    let egg = pair(&g, &g);
    assert!(!egg.is_identity());
    for _ in 0..trials {
        let (a, b) = (
            Scalar::<En>::random(&mut rng),
            Scalar::<En>::random(&mut rng),
        );
        let (ga, gb) = (g.pow(&a), g.pow(&b));
        assert_eq!(pair(&ga, &gb), egg.pow(&(a * b)));
        assert_eq!(pair(&ga, &gb), pair(&gb, &ga));
    }
}

#[test]
fn bilinearity_bls() {
    bilinearity_trials::<E>(1000, 1);
}

#[test]
fn bilinearity_type_a() {
    bilinearity_trials::<TypeA>(200, 2);
}

fn encodings_round_trip<En: Engine>(seed: u64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g = G1Element::<En>::generator();
    for _ in 0..200 {
        let s = Scalar::<En>::random(&mut rng);
        let p = g.pow(&s);
        let t = GtElement::<En>::random(&mut rng);
        assert_eq!(Scalar::<En>::from_bytes(&s.to_bytes()).unwrap(), s);
        assert_eq!(G1Element::<En>::from_bytes(&p.to_bytes()).unwrap(), p);
        assert_eq!(GtElement::<En>::from_bytes(&t.to_bytes()).unwrap(), t);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<G1Element<En>>(&json).unwrap(), p);
    }
    assert_eq!(
        G1Element::<En>::from_bytes(&G1Element::<En>::identity().to_bytes()).unwrap(),
        G1Element::identity()
    );
    assert_eq!(
        GtElement::<En>::from_bytes(&GtElement::<En>::identity().to_bytes()).unwrap(),
        GtElement::identity()
    );
}

#[test]
fn encodings_round_trip_bls() {
    encodings_round_trip::<E>(3);
}

#[test]
fn encodings_round_trip_type_a() {
    encodings_round_trip::<TypeA>(4);
}

#[test]
fn encodings_reject_foreign_engines() {
    let g = G1Element::<E>::generator().to_bytes();
    assert!(G1Element::<TypeA>::from_bytes(&g).is_err());
    let s = Scalar::<TypeA>::from_u64(5).to_bytes();
    assert!(Scalar::<E>::from_bytes(&s).is_err());
    let mut bad = g.clone();
    bad[2] ^= 0xff;
    assert!(G1Element::<E>::from_bytes(&bad).is_err());
}

#[test]
fn bls_pair_halves_must_agree() {
    // (g1^a, g2^b) with a != b is not a valid element
    let a = G1Element::<E>::generator()
        .pow(&Scalar::from_u64(2))
        .to_bytes();
    let b = G1Element::<E>::generator()
        .pow(&Scalar::from_u64(3))
        .to_bytes();
    let split = 3 + 48;
    let mut mixed = a[..split].to_vec();
    mixed.extend_from_slice(&b[split..]);
    assert!(G1Element::<E>::from_bytes(&mixed).is_err());
}

fn hashes_nonzero<En: Engine>() {
    let ctx = BilinearContext::<En>::new();
    let g = ctx.g();
    let mut seen = BTreeMap::new();
    for i in 0u32..10_000 {
        let h1 = ctx.hash_h1(&i.to_be_bytes());
        assert!(!h1.is_zero());
        seen.insert(h1.to_bytes(), i);
    }
    assert_eq!(seen.len(), 10_000);
    let mut p = g;
    for _ in 0..2_000 {
        assert!(!ctx.hash_h2(&p).is_zero());
        p = p * g;
    }
    assert!(!ctx.hash_h1(b"").is_zero());
    assert!(!ctx.hash_h2(&G1Element::identity()).is_zero());
}

#[test]
fn hashes_are_nonzero_bls() {
    hashes_nonzero::<E>();
}

#[test]
fn hashes_are_nonzero_type_a() {
    hashes_nonzero::<TypeA>();
}

#[test]
fn context_rejects_unsupported_levels() {
    use rbks_core::pairing::{setup_context, SecurityLevel};
    assert!(SecurityLevel::from_bits(64).is_err());
    assert!(setup_context::<E>(SecurityLevel::Legacy80).is_err());
    assert_eq!(BilinearContext::<TypeA>::new().order_bits(), 160);
    assert_eq!(BilinearContext::<E>::new().order_bits(), 255);
}
