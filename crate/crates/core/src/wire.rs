//! Byte formats: ciphertext archives, trapdoor blobs and JSON key files.
//!
//! Archive and trapdoor layouts share a frame:
//!
//! ```text
//! magic[4] | version u16 | engine id u8 | manifest_len u32 | manifest (JSON)
//!          | element count u32 | (len u32 | element encoding)*
//!          | payload_len u64 | payload          (archives only)
//! ```
//!
//! Keywords never appear in an archive manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::client::{Trapdoor, TrapdoorRoleComponent};
use crate::error::{Error, Result};
use crate::hierarchy::{OrgId, RoleId};
use crate::owner::{AccessPolicy, Ciphertext};
use crate::pairing::{Engine, G1Element, GtElement, Scalar, SecurityLevel};

pub const ARCHIVE_MAGIC: [u8; 4] = *b"RBKA";
pub const TRAPDOOR_MAGIC: [u8; 4] = *b"RBKT";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct ArchiveManifest {
    policy: AccessPolicy,
    keyword_count: usize,
}

#[derive(Serialize, Deserialize)]
struct TrapdoorManifest {
    user_id: String,
    org: OrgId,
    ts: u64,
    roles: BTreeSet<RoleId>,
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedArchive(msg.into())
}

struct Writer(Vec<u8>);

impl Writer {
    fn new<E: Engine>(magic: [u8; 4], manifest: &impl Serialize) -> Self {
        let mut out = magic.to_vec();
        out.extend_from_slice(&FORMAT_VERSION.to_be_bytes());
        out.push(E::ID);
        let json = serde_json::to_vec(manifest).expect("manifest serializes");
        out.extend_from_slice(&(json.len() as u32).to_be_bytes());
        out.extend_from_slice(&json);
        Writer(out)
    }

    fn elements(&mut self, elems: &[Vec<u8>]) {
        self.0
            .extend_from_slice(&(elems.len() as u32).to_be_bytes());
        for e in elems {
            self.0.extend_from_slice(&(e.len() as u32).to_be_bytes());
            self.0.extend_from_slice(e);
        }
    }
}

struct Reader<'a> {
    rest: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.rest.len() < n {
            return Err(malformed("truncated"));
        }
        let (head, tail) = self.rest.split_at(n);
        self.rest = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| malformed("length overflow"))
    }

    fn open<E: Engine, M: DeserializeOwned>(bytes: &'a [u8], magic: [u8; 4]) -> Result<(Self, M)> {
        let mut r = Reader { rest: bytes };
        if r.take(4)? != magic {
            return Err(malformed("bad magic"));
        }
        let version = u16::from_be_bytes(r.take(2)?.try_into().expect("2 bytes"));
        if version != FORMAT_VERSION {
            return Err(malformed(format!("unsupported version {version}")));
        }
        let engine = r.take(1)?[0];
        if engine != E::ID {
            return Err(malformed(format!(
                "encoded for engine {engine}, expected {}",
                E::ID
            )));
        }
        let len = r.u32()?;
        let manifest =
            serde_json::from_slice(r.take(len)?).map_err(|e| malformed(e.to_string()))?;
        Ok((r, manifest))
    }

    fn elements(&mut self, expected: usize) -> Result<Vec<&'a [u8]>> {
        let count = self.u32()?;
        if count != expected {
            return Err(malformed(format!(
                "expected {expected} elements, found {count}"
            )));
        }
        (0..count)
            .map(|_| {
                let len = self.u32()?;
                self.take(len)
            })
            .collect()
    }

    fn finish(self) -> Result<()> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(malformed("trailing bytes"))
        }
    }
}

/// Engine of an archive or trapdoor blob, read from its header.
pub fn peek_level(bytes: &[u8]) -> Result<SecurityLevel> {
    if bytes.len() < 7 || (bytes[..4] != ARCHIVE_MAGIC && bytes[..4] != TRAPDOOR_MAGIC) {
        return Err(malformed("bad magic"));
    }
    SecurityLevel::from_engine_id(bytes[6]).ok_or_else(|| malformed("unknown engine"))
}

pub fn encode_ciphertext<E: Engine>(ct: &Ciphertext<E>) -> Vec<u8> {
    let manifest = ArchiveManifest {
        policy: ct.policy.clone(),
        keyword_count: ct.keyword_count,
    };
    let mut w = Writer::new::<E>(ARCHIVE_MAGIC, &manifest);
    let mut elems = vec![ct.c1.to_bytes(), ct.c2.to_bytes(), ct.c3.to_bytes()];
    for org in ct.policy.orgs() {
        elems.push(ct.c4[org].to_bytes());
        elems.push(ct.c4p[org].to_bytes());
    }
    for role in ct.policy.roles() {
        elems.push(ct.cr[role].to_bytes());
        elems.push(ct.crp[role].to_bytes());
    }
    w.elements(&elems);
    w.0.extend_from_slice(&(ct.payload.len() as u64).to_be_bytes());
    w.0.extend_from_slice(&ct.payload);
    w.0
}

pub fn decode_ciphertext<E: Engine>(bytes: &[u8]) -> Result<Ciphertext<E>> {
    let (mut r, manifest): (_, ArchiveManifest) = Reader::open::<E, _>(bytes, ARCHIVE_MAGIC)?;
    let policy = manifest.policy;
    let expected = 3 + 2 * policy.orgs().len() + 2 * policy.roles().len();
    let elems = r.elements(expected)?;
    let c1 = GtElement::<E>::from_bytes(elems[0])?;
    let mut rest = elems[1..].iter();
    let mut g1 = || G1Element::<E>::from_bytes(rest.next().expect("count checked"));

    let c2 = g1()?;
    let c3 = g1()?;
    let mut c4 = BTreeMap::new();
    let mut c4p = BTreeMap::new();
    for org in policy.orgs() {
        c4.insert(org.clone(), g1()?);
        c4p.insert(org.clone(), g1()?);
    }
    let mut cr = BTreeMap::new();
    let mut crp = BTreeMap::new();
    for role in policy.roles() {
        cr.insert(role.clone(), g1()?);
        crp.insert(role.clone(), g1()?);
    }
    let len = r.u64()?;
    let payload = r.take(len)?.to_vec();
    r.finish()?;
    Ok(Ciphertext {
        payload,
        c1,
        c2,
        c3,
        c4,
        c4p,
        cr,
        crp,
        policy,
        keyword_count: manifest.keyword_count,
    })
}

pub fn encode_trapdoor<E: Engine>(trap: &Trapdoor<E>) -> Vec<u8> {
    let manifest = TrapdoorManifest {
        user_id: trap.user_id.clone(),
        org: trap.org.clone(),
        ts: trap.ts,
        roles: trap.roles.keys().cloned().collect(),
    };
    let mut w = Writer::new::<E>(TRAPDOOR_MAGIC, &manifest);
    let mut elems = vec![
        trap.tr1.to_bytes(),
        trap.tr2.to_bytes(),
        trap.tr3.to_bytes(),
        trap.tr4.to_bytes(),
    ];
    for comp in trap.roles.values() {
        elems.push(comp.tr1.to_bytes());
        elems.push(comp.tr2.to_bytes());
    }
    w.elements(&elems);
    w.0
}

pub fn decode_trapdoor<E: Engine>(bytes: &[u8]) -> Result<Trapdoor<E>> {
    let (mut r, manifest): (_, TrapdoorManifest) = Reader::open::<E, _>(bytes, TRAPDOOR_MAGIC)?;
    if manifest.ts == 0 {
        return Err(Error::InvalidTimestamp);
    }
    let elems = r.elements(4 + 2 * manifest.roles.len())?;
    r.finish()?;
    let tr1 = Scalar::<E>::from_bytes(elems[0])?;
    let mut rest = elems[1..].iter();
    let mut g1 = || G1Element::<E>::from_bytes(rest.next().expect("count checked"));
    let (tr2, tr3, tr4) = (g1()?, g1()?, g1()?);
    let mut roles = BTreeMap::new();
    for role in manifest.roles {
        let comp = TrapdoorRoleComponent {
            tr1: g1()?,
            tr2: g1()?,
        };
        roles.insert(role, comp);
    }
    Ok(Trapdoor {
        user_id: manifest.user_id,
        org: manifest.org,
        ts: manifest.ts,
        tr1,
        tr2,
        tr3,
        tr4,
        roles,
    })
}

/// Envelope of every JSON key file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyFile<T> {
    pub format: String,
    pub version: u16,
    pub engine: SecurityLevel,
    /// What the body holds, e.g. `master-secret` or `user-keys`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub org: Option<OrgId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub body: T,
}

const KEY_FORMAT: &str = "rbks-key";

impl<T> KeyFile<T> {
    pub fn new(engine: SecurityLevel, kind: &str, body: T) -> Self {
        Self {
            format: KEY_FORMAT.into(),
            version: FORMAT_VERSION,
            engine,
            kind: kind.into(),
            org: None,
            subject: None,
            body,
        }
    }

    pub fn with_org(mut self, org: &OrgId) -> Self {
        self.org = Some(org.clone());
        self
    }

    pub fn with_subject(mut self, subject: &str) -> Self {
        self.subject = Some(subject.into());
        self
    }
}

pub fn write_key_file<T: Serialize>(path: &Path, file: &KeyFile<T>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_vec_pretty(file)?)?;
    Ok(())
}

#[derive(Deserialize)]
struct KeyFileHeader {
    format: String,
    version: u16,
    engine: SecurityLevel,
    kind: String,
}

/// Engine a key file was written for, without decoding its body.
pub fn peek_key_file(path: &Path) -> Result<SecurityLevel> {
    let header: KeyFileHeader = serde_json::from_slice(&std::fs::read(path)?)?;
    check_header(&header, None)?;
    Ok(header.engine)
}

fn check_header(h: &KeyFileHeader, kind: Option<&str>) -> Result<()> {
    if h.format != KEY_FORMAT || h.version != FORMAT_VERSION {
        return Err(malformed(format!(
            "not a version-{FORMAT_VERSION} key file"
        )));
    }
    match kind {
        Some(k) if k != h.kind => Err(malformed(format!(
            "expected a {k} key file, found {}",
            h.kind
        ))),
        _ => Ok(()),
    }
}

/// Reads a key file of the given kind; element fields decode for `E` only.
pub fn read_key_file<E: Engine, T: DeserializeOwned>(
    path: &Path,
    kind: &str,
) -> Result<KeyFile<T>> {
    let bytes = std::fs::read(path)?;
    let header: KeyFileHeader = serde_json::from_slice(&bytes)?;
    check_header(&header, Some(kind))?;
    if header.engine != E::LEVEL {
        return Err(malformed(format!(
            "key file is for {}, not {}",
            header.engine,
            E::NAME
        )));
    }
    Ok(serde_json::from_slice(&bytes)?)
}
