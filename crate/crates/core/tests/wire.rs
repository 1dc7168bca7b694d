mod common;

use common::{World, NOW};
use rbks_core::authority::{MasterSecret, PublicParams, UserKeys};
use rbks_core::cloud::CiphertextStore;
use rbks_core::hierarchy::OrgId;
use rbks_core::pairing::{Bls12Paired, Engine, SecurityLevel, TypeA};
use rbks_core::wire::{
    decode_ciphertext, decode_trapdoor, encode_ciphertext, encode_trapdoor, peek_key_file,
    peek_level, read_key_file, write_key_file, KeyFile,
};

type E = Bls12Paired;

fn world() -> World<E> {
    let mut w = World::<E>::two_orgs(30);
    w.enroll(
        "alice",
        &[
            World::<E>::role("clinic", "doctor"),
            World::<E>::role("lab", "researcher"),
        ],
    );
    w
}

fn tmpdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("rbks-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn archive_round_trip_hides_keywords() {
    let mut w = world();
    let p = World::<E>::policy(
        &[
            World::<E>::role("clinic", "doctor"),
            World::<E>::role("lab", "assistant"),
        ],
        "clinic",
    );
    let id = w.store(b"payload bytes", &["secret-keyword", "another"], &p);
    let ct = w.cloud.store.get(id).unwrap();
    let blob = encode_ciphertext(ct);
    assert_eq!(peek_level(&blob).unwrap(), SecurityLevel::Standard128);
    assert_eq!(&decode_ciphertext::<E>(&blob).unwrap(), ct);
    assert!(!blob.windows(14).any(|win| win == b"secret-keyword"));
    assert!(decode_ciphertext::<TypeA>(&blob).is_err());
    for cut in [0, 3, 7, 20, blob.len() - 1] {
        assert!(decode_ciphertext::<E>(&blob[..cut]).is_err());
    }
    let mut flipped = blob.clone();
    flipped[0] ^= 1;
    assert!(decode_ciphertext::<E>(&flipped).is_err());
    assert!(ct.is_well_formed());
}

#[test]
fn trapdoor_blob_round_trip() {
    let mut w = world();
    let (trap, session) = w.trapdoor("alice", "clinic", &["k"], None, NOW);
    let blob = encode_trapdoor(&trap);
    assert_eq!(decode_trapdoor::<E>(&blob).unwrap(), trap);
    assert_eq!(&trap.digest(), session.trapdoor_digest());
}

#[test]
fn partial_ciphertext_is_payload_plus_two_gt() {
    let mut w = world();
    let p = World::<E>::policy(&[World::<E>::role("clinic", "doctor")], "clinic");
    w.store(&[7u8; 100], &["k"], &p);
    let (outcome, _) = w.query("alice", "clinic", &["k"]).unwrap();
    let pc = &outcome.matches[0].1;
    let json = serde_json::to_value(pc).unwrap();
    let fields: Vec<&str> = json
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    assert_eq!(fields, ["c1", "payload", "v10"]);
    assert_eq!(pc.c1.to_bytes().len(), 3 + E::GT_BYTES);
    assert_eq!(pc.v10.to_bytes().len(), 3 + E::GT_BYTES);
}

#[test]
fn store_persists_appends_and_reloads() {
    let mut w = world();
    let dir = tmpdir("store");
    let p = World::<E>::policy(&[World::<E>::role("clinic", "doctor")], "clinic");
    let ct = |w: &mut World<E>, m: &[u8]| {
        let id = w.store(m, &["k"], &p);
        w.cloud.store.get(id).unwrap().clone()
    };
    let (a, b) = (ct(&mut w, b"a"), ct(&mut w, b"b"));

    let mut store = CiphertextStore::<E>::new();
    store.insert_persisted(&dir, a.clone()).unwrap();
    store.insert_persisted(&dir, b.clone()).unwrap();
    let loaded = CiphertextStore::<E>::load(&dir).unwrap();
    assert_eq!(loaded.len(), 2);
    assert_eq!(loaded.get(0).unwrap(), &a);
    assert_eq!(loaded.get(1).unwrap(), &b);
    assert_eq!(
        loaded.ids_for_roles(a.policy.roles()).collect::<Vec<_>>(),
        vec![0, 1]
    );

    let mut loaded = loaded;
    loaded.insert(a.clone());
    loaded.save(&dir).unwrap();
    assert_eq!(CiphertextStore::<E>::load(&dir).unwrap().len(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn key_files_round_trip_and_check_engine() {
    let w = world();
    let dir = tmpdir("keys");
    let org = OrgId::new("clinic");
    let ms = &w.masters[&org];
    let path = dir.join("ms.json");
    write_key_file(
        &path,
        &KeyFile::new(E::LEVEL, "master-secret", ms.clone()).with_org(&org),
    )
    .unwrap();
    assert_eq!(peek_key_file(&path).unwrap(), SecurityLevel::Standard128);
    let back: KeyFile<MasterSecret<E>> = read_key_file::<E, _>(&path, "master-secret").unwrap();
    assert_eq!(&back.body, ms);
    assert!(read_key_file::<E, MasterSecret<E>>(&path, "user-keys").is_err());
    assert!(read_key_file::<TypeA, MasterSecret<TypeA>>(&path, "master-secret").is_err());

    let pp_path = dir.join("pp.json");
    write_key_file(
        &pp_path,
        &KeyFile::new(E::LEVEL, "public-params", w.pp.clone()),
    )
    .unwrap();
    let pp: KeyFile<PublicParams<E>> = read_key_file::<E, _>(&pp_path, "public-params").unwrap();
    assert_eq!(pp.body, w.pp);

    let uk = &w.users["alice"].keys[&org];
    let json = serde_json::to_string(uk).unwrap();
    assert_eq!(&serde_json::from_str::<UserKeys<E>>(&json).unwrap(), uk);
    std::fs::remove_dir_all(&dir).unwrap();
}
