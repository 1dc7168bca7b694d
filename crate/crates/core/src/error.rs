use thiserror::Error;

use crate::cloud::Rejection;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported security level: {0} bits")]
    UnsupportedSecurityLevel(u32),
    #[error("invalid encoding of {0}")]
    InvalidEncoding(&'static str),

    #[error("role hierarchy contains a cycle through {0}")]
    CycleDetected(String),
    #[error("role hierarchy has more than one root: {0}")]
    MultipleRoots(String),
    #[error("role {0} is not reachable from the root")]
    UnreachableRole(String),
    #[error("unknown role {0}")]
    UnknownRole(String),
    #[error("the root role is managed by the authority and cannot be revoked")]
    RootRoleNotRevocable,
    #[error("malformed hierarchy description at line {line}: {reason}")]
    HierarchySyntax { line: usize, reason: String },

    #[error("group key agreement needs at least {0} participants")]
    NotEnoughParticipants(usize),
    #[error("group key agreement round data mismatch: {0}")]
    MismatchedRoundData(String),

    #[error("unknown organization {0}")]
    UnknownOrg(String),
    #[error("unknown user {0}")]
    UnknownUser(String),

    #[error("access policy has no roles")]
    EmptyPolicy,
    #[error("owner organization {0} does not appear in the policy")]
    OwnerOrgNotInPolicy(String),
    #[error("no role public key for {0}")]
    MissingRolePk(String),
    #[error("no cloud public key for organization {0}")]
    MissingCloudKey(String),
    #[error("keyword list is empty")]
    EmptyKeywords,
    #[error("payload authentication failed")]
    AuthenticationFailure,

    #[error("timestamp must be positive")]
    InvalidTimestamp,
    #[error("trapdoor role set is empty")]
    EmptyRoleSet,
    #[error("user does not hold role {0}")]
    RoleNotHeld(String),
    #[error("no proxy re-encryption key for {held} acting on {target}")]
    MissingProxyKey { held: String, target: String },
    #[error("unknown ciphertext {0}")]
    UnknownCiphertext(u64),

    #[error("search rejected: {0}")]
    Rejected(#[from] Rejection),

    #[error("malformed archive: {0}")]
    MalformedArchive(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
