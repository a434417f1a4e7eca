//! In-process notarization ledger for running tasks.
//!
//! Each deployed task is represented by a non-fungible token whose 256-bit id
//! packs the task's resource requirements. Tokens are minted on first
//! placement, transferred when the task moves and burned when it stops.
//! Running time is paid for in fungible units, and a token cannot move while
//! any accrued amount is unpaid.
//!
//! All state changes go through a single `apply` step that appends to the
//! event log, so replaying the log rebuilds the exact same state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{NodeId, TaskId, TaskSpec, MIB};

pub const GAS_MINT: u64 = 144_373;
pub const GAS_TRANSFER: u64 = 56_072;
pub const GAS_BURN: u64 = 29_175;

/// Version of the token id layout, mixed into the metadata digest.
pub const LAYOUT_VERSION: u8 = 1;
pub const SERIAL_MAX: u64 = (1 << 63) - 1;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LedgerError {
    #[error("`{0}` is not an authorized minter")]
    UnauthorizedMinter(Account),
    #[error("task `{0}` already has a token")]
    DuplicateTask(TaskId),
    #[error("unknown token {0}")]
    UnknownToken(TokenId),
    #[error("token {0} has been burned")]
    TokenBurned(TokenId),
    #[error("token {token} is owned by `{actual}`, not `{expected}`")]
    WrongOwner {
        token: TokenId,
        expected: Account,
        actual: Account,
    },
    #[error("token {token} has {outstanding} unsettled units")]
    Unsettled { token: TokenId, outstanding: u64 },
    #[error("account `{account}` holds {available} units, {needed} needed")]
    InsufficientFunds {
        account: Account,
        needed: u64,
        available: u64,
    },
    #[error("token {0} is flagged fungible")]
    NotNonFungible(TokenId),
    #[error("field {field} value {value} does not fit its bit width")]
    FieldOverflow { field: &'static str, value: u64 },
    #[error("payment rate must be finite and nonnegative, got {0}")]
    InvalidRate(f64),
    #[error("invalid token id: {0}")]
    InvalidTokenHex(String),
    #[error("log replay diverged: {0}")]
    Replay(String),
}

type LResult<T> = std::result::Result<T, LedgerError>;

/// Ledger account: a node contract, a minting origin or a payment sponsor.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Account(pub String);

impl Account {
    pub fn node(id: &NodeId) -> Self {
        Self(format!("node:{id}"))
    }

    pub fn origin(name: &str) -> Self {
        Self(format!("origin:{name}"))
    }

    pub fn sponsor(task: &TaskId) -> Self {
        Self(format!("sponsor:{task}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Account {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// 256-bit token id, big-endian.
///
/// | bits    | field                              |
/// |---------|------------------------------------|
/// | 255     | 1 = non-fungible, 0 = fungible     |
/// | 254-192 | serial (63 bits)                   |
/// | 191-160 | cpu, milli-cores                   |
/// | 159-128 | ram, MiB rounded up                |
/// | 127-96  | storage, MiB rounded up            |
/// | 95-64   | minter id                          |
/// | 63-0    | metadata digest                    |
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub [u8; 32]);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TokenFields {
    pub non_fungible: bool,
    pub serial: u64,
    pub cpu: u32,
    pub ram_mib: u32,
    pub storage_mib: u32,
    pub minter: u32,
    pub digest: u64,
}

impl TokenFields {
    pub fn encode(&self) -> LResult<TokenId> {
        if self.serial > SERIAL_MAX {
            return Err(LedgerError::FieldOverflow {
                field: "serial",
                value: self.serial,
            });
        }
        let mut b = [0u8; 32];
        let head = (u64::from(self.non_fungible) << 63) | self.serial;
        b[0..8].copy_from_slice(&head.to_be_bytes());
        b[8..12].copy_from_slice(&self.cpu.to_be_bytes());
        b[12..16].copy_from_slice(&self.ram_mib.to_be_bytes());
        b[16..20].copy_from_slice(&self.storage_mib.to_be_bytes());
        b[20..24].copy_from_slice(&self.minter.to_be_bytes());
        b[24..32].copy_from_slice(&self.digest.to_be_bytes());
        Ok(TokenId(b))
    }
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes(b.try_into().expect("4 bytes"))
}

fn be_u64(b: &[u8]) -> u64 {
    u64::from_be_bytes(b.try_into().expect("8 bytes"))
}

impl TokenId {
    pub fn decode(&self) -> TokenFields {
        let b = &self.0;
        let head = be_u64(&b[0..8]);
        TokenFields {
            non_fungible: head >> 63 == 1,
            serial: head & SERIAL_MAX,
            cpu: be_u32(&b[8..12]),
            ram_mib: be_u32(&b[12..16]),
            storage_mib: be_u32(&b[16..20]),
            minter: be_u32(&b[20..24]),
            digest: be_u64(&b[24..32]),
        }
    }

    /// Decodes a token that must be non-fungible.
    pub fn decode_nft(&self) -> LResult<TokenFields> {
        let f = self.decode();
        if f.non_fungible {
            Ok(f)
        } else {
            Err(LedgerError::NotNonFungible(*self))
        }
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TokenId({})", self.to_hex())
    }
}

impl FromStr for TokenId {
    type Err = LedgerError;

    fn from_str(s: &str) -> LResult<Self> {
        if s.len() != 64 {
            return Err(LedgerError::InvalidTokenHex(format!("expected 64 hex digits, got {}", s.len())));
        }
        let mut b = [0u8; 32];
        hex::decode_to_slice(s, &mut b).map_err(|e| LedgerError::InvalidTokenHex(e.to_string()))?;
        Ok(TokenId(b))
    }
}

impl Serialize for TokenId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for TokenId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn mib_ceil(bytes: u64, field: &'static str) -> LResult<u32> {
    let mib = bytes.div_ceil(MIB);
    u32::try_from(mib).map_err(|_| LedgerError::FieldOverflow { field, value: mib })
}

/// Hash of the layout version, the hosting location and the linked ids.
pub fn metadata_digest(location: &NodeId, task: &TaskSpec) -> u64 {
    let mut h = Sha256::new();
    h.update([LAYOUT_VERSION]);
    for part in [location.as_str(), task.id.as_str(), task.source_device.as_str(), task.sink_node.as_str()] {
        h.update((part.len() as u64).to_be_bytes());
        h.update(part.as_bytes());
    }
    let out = h.finalize();
    be_u64(&out[..8])
}

/// Field tuple a task token carries.
pub fn task_token_fields(task: &TaskSpec, serial: u64, minter: u32, location: &NodeId) -> LResult<TokenFields> {
    let cpu = u32::try_from(task.req_cpu).map_err(|_| LedgerError::FieldOverflow {
        field: "cpu",
        value: task.req_cpu,
    })?;
    Ok(TokenFields {
        non_fungible: true,
        serial,
        cpu,
        ram_mib: mib_ceil(task.req_ram, "ram")?,
        storage_mib: mib_ceil(task.exe_size, "storage")?,
        minter,
        digest: metadata_digest(location, task),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LedgerOp {
    AuthorizeMinter {
        minter: Account,
        minter_id: u32,
    },
    Fund {
        account: Account,
        amount: u64,
    },
    Mint {
        token: TokenId,
        task: TaskId,
        minter: Account,
        owner: Account,
        sponsor: Account,
    },
    /// Charges running time up to the cumulative duration `until`.
    Accrue {
        token: TokenId,
        until: f64,
        amount: u64,
    },
    Payment {
        token: TokenId,
        from: Account,
        to: Account,
        amount: u64,
    },
    Transfer {
        token: TokenId,
        from: Account,
        to: Account,
    },
    Burn {
        token: TokenId,
        owner: Account,
    },
}

impl LedgerOp {
    pub fn gas(&self) -> u64 {
        match self {
            LedgerOp::Mint { .. } => GAS_MINT,
            LedgerOp::Transfer { .. } => GAS_TRANSFER,
            LedgerOp::Burn { .. } => GAS_BURN,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub seq: u64,
    pub at: f64,
    pub gas: u64,
    pub op: LedgerOp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub task: TaskId,
    pub owner: Account,
    pub sponsor: Account,
    pub minted_at: f64,
    /// Cumulative running time already charged.
    pub charged_until: f64,
    pub outstanding: u64,
    /// Minter first, then every owner in order.
    pub history: Vec<Account>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    minters: BTreeMap<Account, u32>,
    balances: BTreeMap<Account, u64>,
    live: BTreeMap<TokenId, TokenRecord>,
    burned: BTreeMap<TokenId, TokenRecord>,
    task_tokens: BTreeMap<TaskId, TokenId>,
    next_serial: u64,
    gas_total: u64,
    log: Vec<LedgerEvent>,
}

impl Ledger {
    pub fn new() -> Self {
        Self {
            next_serial: 1,
            ..Default::default()
        }
    }

    pub fn gas_total(&self) -> u64 {
        self.gas_total
    }

    pub fn log(&self) -> &[LedgerEvent] {
        &self.log
    }

    pub fn balance(&self, account: &Account) -> u64 {
        self.balances.get(account).copied().unwrap_or(0)
    }

    pub fn owner(&self, token: &TokenId) -> Option<&Account> {
        self.live.get(token).map(|r| &r.owner)
    }

    pub fn token(&self, token: &TokenId) -> Option<&TokenRecord> {
        self.live.get(token).or_else(|| self.burned.get(token))
    }

    pub fn token_of(&self, task: &str) -> Option<TokenId> {
        self.task_tokens.get(task).copied()
    }

    pub fn live_tokens(&self) -> impl Iterator<Item = (&TokenId, &TokenRecord)> {
        self.live.iter()
    }

    pub fn is_burned(&self, token: &TokenId) -> bool {
        self.burned.contains_key(token)
    }

    pub fn ownership_history(&self, token: &TokenId) -> Option<&[Account]> {
        self.token(token).map(|r| r.history.as_slice())
    }

    pub fn count(&self, kind: &str) -> usize {
        self.log.iter().filter(|e| op_name(&e.op) == kind).count()
    }

    fn live_record(&self, token: &TokenId) -> LResult<&TokenRecord> {
        if self.burned.contains_key(token) {
            return Err(LedgerError::TokenBurned(*token));
        }
        self.live.get(token).ok_or(LedgerError::UnknownToken(*token))
    }

    fn check_mover(&self, token: &TokenId, owner: &Account) -> LResult<&TokenRecord> {
        let rec = self.live_record(token)?;
        if &rec.owner != owner {
            return Err(LedgerError::WrongOwner {
                token: *token,
                expected: owner.clone(),
                actual: rec.owner.clone(),
            });
        }
        if rec.outstanding > 0 {
            return Err(LedgerError::Unsettled {
                token: *token,
                outstanding: rec.outstanding,
            });
        }
        Ok(rec)
    }

    /// Validates `op` against the current state, then applies it and
    /// appends it to the log. A rejected op leaves the ledger untouched.
    pub fn apply(&mut self, op: LedgerOp, at: f64) -> LResult<()> {
        match &op {
            LedgerOp::AuthorizeMinter { minter, minter_id } => {
                self.minters.insert(minter.clone(), *minter_id);
            }
            LedgerOp::Fund { account, amount } => {
                *self.balances.entry(account.clone()).or_default() += amount;
            }
            LedgerOp::Mint {
                token,
                task,
                minter,
                owner,
                sponsor,
            } => {
                let minter_id = *self
                    .minters
                    .get(minter)
                    .ok_or_else(|| LedgerError::UnauthorizedMinter(minter.clone()))?;
                if self.task_tokens.contains_key(task) {
                    return Err(LedgerError::DuplicateTask(task.clone()));
                }
                let fields = token.decode_nft()?;
                if self.live.contains_key(token) || self.burned.contains_key(token) || fields.minter != minter_id {
                    return Err(LedgerError::Replay(format!("token {token} cannot be minted here")));
                }
                self.next_serial = self.next_serial.max(fields.serial + 1);
                self.task_tokens.insert(task.clone(), *token);
                self.live.insert(
                    *token,
                    TokenRecord {
                        task: task.clone(),
                        owner: owner.clone(),
                        sponsor: sponsor.clone(),
                        minted_at: at,
                        charged_until: 0.0,
                        outstanding: 0,
                        history: vec![minter.clone(), owner.clone()],
                    },
                );
            }
            LedgerOp::Accrue { token, until, amount } => {
                let rec = self.live_record(token)?;
                if !(*until > rec.charged_until) {
                    return Err(LedgerError::Replay(format!("accrual for {token} does not advance")));
                }
                let rec = self.live.get_mut(token).expect("live");
                rec.charged_until = *until;
                rec.outstanding += amount;
            }
            LedgerOp::Payment { token, from, to, amount } => {
                let rec = self.live_record(token)?;
                if &rec.sponsor != from || &rec.owner != to || rec.outstanding != *amount {
                    return Err(LedgerError::Replay(format!("payment for {token} does not match its accrual")));
                }
                let available = self.balance(from);
                if available < *amount {
                    return Err(LedgerError::InsufficientFunds {
                        account: from.clone(),
                        needed: *amount,
                        available,
                    });
                }
                *self.balances.entry(from.clone()).or_default() -= amount;
                *self.balances.entry(to.clone()).or_default() += amount;
                self.live.get_mut(token).expect("live").outstanding = 0;
            }
            LedgerOp::Transfer { token, from, to } => {
                self.check_mover(token, from)?;
                let rec = self.live.get_mut(token).expect("live");
                rec.owner = to.clone();
                rec.history.push(to.clone());
            }
            LedgerOp::Burn { token, owner } => {
                self.check_mover(token, owner)?;
                let rec = self.live.remove(token).expect("live");
                self.burned.insert(*token, rec);
            }
        }
        let gas = op.gas();
        self.gas_total += gas;
        self.log.push(LedgerEvent {
            seq: self.log.len() as u64,
            at,
            gas,
            op,
        });
        Ok(())
    }

    pub fn authorize_minter(&mut self, minter: Account, at: f64) -> u32 {
        if let Some(id) = self.minters.get(&minter) {
            return *id;
        }
        let id = self.minters.len() as u32 + 1;
        self.apply(LedgerOp::AuthorizeMinter { minter, minter_id: id }, at)
            .expect("authorization cannot fail");
        id
    }

    pub fn fund(&mut self, account: Account, amount: u64, at: f64) {
        if amount > 0 {
            self.apply(LedgerOp::Fund { account, amount }, at).expect("funding cannot fail");
        }
    }

    /// Mints the token for a task newly placed on `target`.
    pub fn mint(
        &mut self,
        task: &TaskSpec,
        minter: &Account,
        target: &NodeId,
        sponsor: Account,
        at: f64,
    ) -> LResult<TokenId> {
        let minter_id = *self
            .minters
            .get(minter)
            .ok_or_else(|| LedgerError::UnauthorizedMinter(minter.clone()))?;
        if self.task_tokens.contains_key(&task.id) {
            return Err(LedgerError::DuplicateTask(task.id.clone()));
        }
        let token = task_token_fields(task, self.next_serial, minter_id, target)?.encode()?;
        self.apply(
            LedgerOp::Mint {
                token,
                task: task.id.clone(),
                minter: minter.clone(),
                owner: Account::node(target),
                sponsor,
            },
            at,
        )?;
        Ok(token)
    }

    pub fn transfer(&mut self, token: &TokenId, from: &NodeId, to: &NodeId, at: f64) -> LResult<()> {
        self.apply(
            LedgerOp::Transfer {
                token: *token,
                from: Account::node(from),
                to: Account::node(to),
            },
            at,
        )
    }

    pub fn burn(&mut self, token: &TokenId, owner: &NodeId, at: f64) -> LResult<()> {
        self.apply(
            LedgerOp::Burn {
                token: *token,
                owner: Account::node(owner),
            },
            at,
        )
    }

    /// Charges `ceil(period × rate)` for the running time between the last
    /// charge and `running_duration`. Repeating a call for the same duration
    /// does nothing.
    pub fn accrue(&mut self, token: &TokenId, running_duration: f64, rate: f64, at: f64) -> LResult<u64> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(LedgerError::InvalidRate(rate));
        }
        let rec = self.live_record(token)?;
        if !(running_duration > rec.charged_until) {
            return Ok(0);
        }
        let amount = ((running_duration - rec.charged_until) * rate).ceil() as u64;
        self.apply(
            LedgerOp::Accrue {
                token: *token,
                until: running_duration,
                amount,
            },
            at,
        )?;
        Ok(amount)
    }

    /// Pays the token's outstanding amount from its sponsor to its owner.
    pub fn settle(&mut self, token: &TokenId, at: f64) -> LResult<u64> {
        let rec = self.live_record(token)?;
        let amount = rec.outstanding;
        if amount == 0 {
            return Ok(0);
        }
        let op = LedgerOp::Payment {
            token: *token,
            from: rec.sponsor.clone(),
            to: rec.owner.clone(),
            amount,
        };
        self.apply(op, at)?;
        Ok(amount)
    }

    pub fn accrue_and_settle(&mut self, token: &TokenId, running_duration: f64, rate: f64, at: f64) -> LResult<u64> {
        self.accrue(token, running_duration, rate, at)?;
        self.settle(token, at)
    }

    /// Rebuilds a ledger from its log, checking each event reproduces the
    /// same sequence number and gas.
    pub fn replay(events: &[LedgerEvent]) -> LResult<Self> {
        let mut l = Ledger::new();
        for e in events {
            l.apply(e.op.clone(), e.at)?;
            let got = l.log.last().expect("just appended");
            if got != e {
                return Err(LedgerError::Replay(format!("event {} differs after replay", e.seq)));
            }
        }
        Ok(l)
    }

    /// Describes every broken ledger invariant; empty when consistent.
    pub fn check_invariants(&self) -> Vec<String> {
        check_log(&self.log, Some(self.gas_total))
    }
}

fn op_name(op: &LedgerOp) -> &'static str {
    match op {
        LedgerOp::AuthorizeMinter { .. } => "authorize_minter",
        LedgerOp::Fund { .. } => "fund",
        LedgerOp::Mint { .. } => "mint",
        LedgerOp::Accrue { .. } => "accrue",
        LedgerOp::Payment { .. } => "payment",
        LedgerOp::Transfer { .. } => "transfer",
        LedgerOp::Burn { .. } => "burn",
    }
}

/// Checks gas additivity, single ownership and payment-before-movement on a
/// raw event log.
pub fn check_log(log: &[LedgerEvent], gas_total: Option<u64>) -> Vec<String> {
    let mut out = Vec::new();
    let (mut mints, mut transfers, mut burns, mut summed) = (0u64, 0u64, 0u64, 0u64);
    let mut owners: BTreeMap<TokenId, Account> = BTreeMap::new();
    let mut dead: BTreeSet<TokenId> = BTreeSet::new();
    let mut outstanding: BTreeMap<TokenId, u64> = BTreeMap::new();
    for (i, e) in log.iter().enumerate() {
        if e.seq != i as u64 {
            out.push(format!("log sequence broken at position {i}"));
        }
        if e.gas != e.op.gas() {
            out.push(format!("event {} charges {} gas, expected {}", e.seq, e.gas, e.op.gas()));
        }
        summed += e.gas;
        match &e.op {
            LedgerOp::Mint { token, owner, .. } => {
                mints += 1;
                if dead.contains(token) || owners.insert(*token, owner.clone()).is_some() {
                    out.push(format!("token {token} minted twice"));
                }
            }
            LedgerOp::Accrue { token, amount, .. } => {
                *outstanding.entry(*token).or_default() += amount;
            }
            LedgerOp::Payment { token, amount, .. } => {
                let o = outstanding.entry(*token).or_default();
                *o = o.saturating_sub(*amount);
            }
            LedgerOp::Transfer { token, from, to } => {
                transfers += 1;
                if owners.get(token) != Some(from) {
                    out.push(format!("event {}: transfer of {token} by a non-owner", e.seq));
                }
                owners.insert(*token, to.clone());
                if outstanding.get(token).copied().unwrap_or(0) > 0 {
                    out.push(format!("event {}: {token} moved with unsettled payment", e.seq));
                }
            }
            LedgerOp::Burn { token, owner } => {
                burns += 1;
                if owners.remove(token).as_ref() != Some(owner) {
                    out.push(format!("event {}: burn of {token} by a non-owner", e.seq));
                }
                dead.insert(*token);
                if outstanding.get(token).copied().unwrap_or(0) > 0 {
                    out.push(format!("event {}: {token} burned with unsettled payment", e.seq));
                }
            }
            LedgerOp::AuthorizeMinter { .. } | LedgerOp::Fund { .. } => {}
        }
    }
    let expected = mints * GAS_MINT + transfers * GAS_TRANSFER + burns * GAS_BURN;
    if summed != expected {
        out.push(format!("gas {summed} differs from per-type total {expected}"));
    }
    if let Some(total) = gas_total {
        if total != summed {
            out.push(format!("gas_total {total} differs from the log sum {summed}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn setup() -> (Ledger, Account, TaskSpec) {
        let mut l = Ledger::new();
        let minter = Account::origin("orchestrator");
        l.authorize_minter(minter.clone(), 0.0);
        (l, minter, fixtures::load_forecasting_task())
    }

    #[test]
    fn gas_constants() {
        let (mut l, m, t) = setup();
        let tok = l.mint(&t, &m, &"edge-1".into(), Account::sponsor(&t.id), 0.0).unwrap();
        assert_eq!(l.gas_total(), 144_373);
        l.transfer(&tok, &"edge-1".into(), &"edge-2".into(), 1.0).unwrap();
        assert_eq!(l.gas_total(), 144_373 + 56_072);
        l.burn(&tok, &"edge-2".into(), 2.0).unwrap();
        assert_eq!(l.gas_total(), 229_620);
        assert!(l.check_invariants().is_empty());
    }

    #[test]
    fn duplicate_and_unauthorized_mint() {
        let (mut l, m, t) = setup();
        l.mint(&t, &m, &"edge-1".into(), Account::sponsor(&t.id), 0.0).unwrap();
        assert!(matches!(
            l.mint(&t, &m, &"edge-1".into(), Account::sponsor(&t.id), 0.0),
            Err(LedgerError::DuplicateTask(_))
        ));
        let other = fixtures::energy_balancer_task();
        assert!(matches!(
            l.mint(&other, &Account::origin("rogue"), &"cloud".into(), Account::sponsor(&other.id), 0.0),
            Err(LedgerError::UnauthorizedMinter(_))
        ));
    }

    #[test]
    fn token_fields_of_load_forecasting() {
        let (mut l, m, t) = setup();
        let tok = l.mint(&t, &m, &"edge-1".into(), Account::sponsor(&t.id), 0.0).unwrap();
        let f = tok.decode_nft().unwrap();
        assert_eq!(f.cpu, 378);
        assert_eq!(f.ram_mib, 21);
        assert_eq!(f.storage_mib, 24);
        assert_eq!(f.serial, 1);
        assert_eq!(f.minter, 1);
        assert_eq!(tok.to_hex().len(), 64);
        assert!(tok.to_hex().starts_with('8'));
        assert_eq!(tok.to_hex().parse::<TokenId>().unwrap(), tok);
    }

    #[test]
    fn fungible_flag_rejected_as_nft() {
        let f = TokenFields {
            non_fungible: false,
            serial: 5,
            cpu: 1,
            ram_mib: 2,
            storage_mib: 3,
            minter: 4,
            digest: 6,
        };
        let id = f.encode().unwrap();
        assert_eq!(id.decode(), f);
        assert!(matches!(id.decode_nft(), Err(LedgerError::NotNonFungible(_))));
        let too_big = TokenFields { serial: 1 << 63, ..f };
        assert!(too_big.encode().is_err());
    }

    #[test]
    fn payments() {
        let (mut l, m, t) = setup();
        let tok = l.mint(&t, &m, &"edge-1".into(), Account::sponsor(&t.id), 0.0).unwrap();
        assert_eq!(l.accrue_and_settle(&tok, 0.0, 2.0, 0.0).unwrap(), 0);
        l.fund(Account::sponsor(&t.id), 10_000, 0.0);
        assert_eq!(l.accrue_and_settle(&tok, 3600.0, 2.0, 3600.0).unwrap(), 7200);
        assert_eq!(l.balance(&Account::node(&"edge-1".into())), 7200);
        let before = l.log().len();
        assert_eq!(l.accrue_and_settle(&tok, 3600.0, 2.0, 3600.0).unwrap(), 0);
        assert_eq!(l.log().len(), before);
    }

    #[test]
    fn unsettled_token_is_locked_until_funded() {
        let (mut l, m, t) = setup();
        let tok = l.mint(&t, &m, &"edge-1".into(), Account::sponsor(&t.id), 0.0).unwrap();
        l.accrue(&tok, 10.0, 1.0, 10.0).unwrap();
        assert!(matches!(
            l.transfer(&tok, &"edge-1".into(), &"edge-2".into(), 10.0),
            Err(LedgerError::Unsettled { outstanding: 10, .. })
        ));
        assert!(matches!(l.settle(&tok, 10.0), Err(LedgerError::InsufficientFunds { .. })));
        assert!(l.burn(&tok, &"edge-1".into(), 10.0).is_err());
        l.fund(Account::sponsor(&t.id), 10, 11.0);
        assert_eq!(l.settle(&tok, 11.0).unwrap(), 10);
        l.transfer(&tok, &"edge-1".into(), &"edge-2".into(), 11.0).unwrap();
        assert!(l.check_invariants().is_empty());
    }

    #[test]
    fn history_and_burned_tokens() {
        let (mut l, m, t) = setup();
        let tok = l.mint(&t, &m, &"edge-1".into(), Account::sponsor(&t.id), 0.0).unwrap();
        assert!(matches!(
            l.transfer(&tok, &"edge-2".into(), &"edge-3".into(), 1.0),
            Err(LedgerError::WrongOwner { .. })
        ));
        l.transfer(&tok, &"edge-1".into(), &"edge-2".into(), 1.0).unwrap();
        assert_eq!(
            l.ownership_history(&tok).unwrap(),
            [m.clone(), Account::node(&"edge-1".into()), Account::node(&"edge-2".into())]
        );
        l.burn(&tok, &"edge-2".into(), 2.0).unwrap();
        assert!(matches!(
            l.transfer(&tok, &"edge-2".into(), &"edge-3".into(), 3.0),
            Err(LedgerError::TokenBurned(_))
        ));
        assert!(matches!(l.burn(&tok, &"edge-2".into(), 3.0), Err(LedgerError::TokenBurned(_))));
    }

    #[test]
    fn replay_reproduces_state() {
        let (mut l, m, t) = setup();
        l.fund(Account::sponsor(&t.id), 100, 0.0);
        let tok = l.mint(&t, &m, &"edge-1".into(), Account::sponsor(&t.id), 0.0).unwrap();
        l.accrue_and_settle(&tok, 12.5, 3.0, 12.5).unwrap();
        l.transfer(&tok, &"edge-1".into(), &"cloud".into(), 12.5).unwrap();
        let replayed = Ledger::replay(l.log()).unwrap();
        assert_eq!(replayed, l);
        assert_eq!(
            serde_json::to_string(&replayed).unwrap(),
            serde_json::to_string(&l).unwrap()
        );
    }

    #[test]
    fn tampered_log_fails_checks() {
        let (mut l, m, t) = setup();
        let tok = l.mint(&t, &m, &"edge-1".into(), Account::sponsor(&t.id), 0.0).unwrap();
        l.transfer(&tok, &"edge-1".into(), &"cloud".into(), 1.0).unwrap();
        let mut log = l.log().to_vec();
        log[2].gas = 1;
        assert!(!check_log(&log, None).is_empty());
        assert!(Ledger::replay(&log).is_err());
    }
}
