//! Structured `key=value` features and their text serialization.
//!
//! A feature key is either a plain namespace (`qword`), a Cartesian pair of
//! keys (`qword*lat`) or a join of keys (`ne-gpe~ne-gpe`). Composite children
//! are parenthesized, so `((qword,lat),ne-type)` prints as
//! `(qword*lat)*ne-type`. The value of a feature is the ordered list of its
//! atomic leaf values, one per plain namespace reachable without crossing a
//! join. Join-produced features carry the unit value, printed as `1`.
//!
//! Serialized form: `<key>:<leaf>|<leaf>|...`, with `%XX` escaping of
//! `: * | ~ %` (and tab/newline/carriage return) inside leaves. Namespaces are
//! restricted to `[A-Za-z0-9_.-]`, which keeps the encoding injective.

mod vector;

pub use vector::SparseVector;

use std::cmp::Ordering;
use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("invalid namespace {0:?}: expected [A-Za-z0-9_.-]+")]
    InvalidNamespace(String),
    #[error("malformed feature {text:?}: {reason}")]
    Malformed { text: String, reason: String },
    #[error("value arity {found} does not match key {key} (expects {expected})")]
    Arity {
        key: String,
        expected: usize,
        found: usize,
    },
    #[error("cannot normalize an empty vector")]
    EmptyNormalization,
}

/// The key half of a feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKey {
    Ns(Arc<str>),
    Cart(Arc<FeatureKey>, Arc<FeatureKey>),
    Join(Arc<FeatureKey>, Arc<FeatureKey>),
}

impl FeatureKey {
    pub fn ns(name: &str) -> Result<Self, FeatureError> {
        if is_valid_namespace(name) {
            Ok(FeatureKey::Ns(Arc::from(name)))
        } else {
            Err(FeatureError::InvalidNamespace(name.to_string()))
        }
    }

    pub fn cart(left: &Arc<FeatureKey>, right: &Arc<FeatureKey>) -> Self {
        FeatureKey::Cart(Arc::clone(left), Arc::clone(right))
    }

    pub fn join(left: &Arc<FeatureKey>, right: &Arc<FeatureKey>) -> Self {
        FeatureKey::Join(Arc::clone(left), Arc::clone(right))
    }

    /// Number of atomic values a feature with this key carries.
    pub fn arity(&self) -> usize {
        match self {
            FeatureKey::Ns(_) => 1,
            FeatureKey::Cart(l, r) => l.arity() + r.arity(),
            FeatureKey::Join(..) => 0,
        }
    }

    pub fn is_plain(&self) -> bool {
        matches!(self, FeatureKey::Ns(_))
    }

    fn write_repr(&self, out: &mut String) {
        match self {
            FeatureKey::Ns(n) => out.push_str(n),
            FeatureKey::Cart(l, r) => {
                l.write_child(out);
                out.push('*');
                r.write_child(out);
            }
            FeatureKey::Join(l, r) => {
                l.write_child(out);
                out.push('~');
                r.write_child(out);
            }
        }
    }

    fn write_child(&self, out: &mut String) {
        if self.is_plain() {
            self.write_repr(out);
        } else {
            out.push('(');
            self.write_repr(out);
            out.push(')');
        }
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_repr(&mut s);
        f.write_str(&s)
    }
}

impl FromStr for FeatureKey {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parser = KeyParser { src: s, pos: 0 };
        let key = parser.key()?;
        if parser.pos != s.len() {
            return Err(parser.fail("trailing characters after key"));
        }
        Ok(key)
    }
}

pub fn is_valid_namespace(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

/// A single `key=value` feature. Equality, hashing and ordering all follow
/// the serialized form.
#[derive(Clone)]
pub struct Feature {
    repr: Arc<str>,
    key: Arc<FeatureKey>,
    value: Arc<[Arc<str>]>,
}

impl Feature {
    /// A plain feature `namespace=value`.
    pub fn new(namespace: &str, value: &str) -> Result<Self, FeatureError> {
        let key = Arc::new(FeatureKey::ns(namespace)?);
        Ok(Self::assemble(key, Arc::from(vec![Arc::<str>::from(value)])))
    }

    /// Builds a feature from a key and its leaf values, checking arity.
    pub fn from_parts(key: Arc<FeatureKey>, value: Arc<[Arc<str>]>) -> Result<Self, FeatureError> {
        let expected = key.arity();
        if expected != value.len() {
            return Err(FeatureError::Arity {
                key: key.to_string(),
                expected,
                found: value.len(),
            });
        }
        Ok(Self::assemble(key, value))
    }

    /// `(k_f, k_g) = (v_f, v_g)`.
    pub fn cartesian(f: &Feature, g: &Feature) -> Self {
        let key = Arc::new(FeatureKey::cart(&f.key, &g.key));
        let value: Vec<Arc<str>> = f.value.iter().chain(g.value.iter()).cloned().collect();
        Self::assemble(key, Arc::from(value))
    }

    /// `(k_f = k_g) = 1`.
    pub fn join_of(left: &Arc<FeatureKey>, right: &Arc<FeatureKey>) -> Self {
        Self::assemble(Arc::new(FeatureKey::join(left, right)), Arc::from(Vec::new()))
    }

    fn assemble(key: Arc<FeatureKey>, value: Arc<[Arc<str>]>) -> Self {
        let mut repr = String::new();
        key.write_repr(&mut repr);
        repr.push(':');
        if value.is_empty() {
            repr.push('1');
        } else {
            for (i, leaf) in value.iter().enumerate() {
                if i > 0 {
                    repr.push('|');
                }
                escape_into(leaf, &mut repr);
            }
        }
        Feature {
            repr: Arc::from(repr),
            key,
            value,
        }
    }

    pub fn key(&self) -> &Arc<FeatureKey> {
        &self.key
    }

    /// Leaf values; empty for join-produced features.
    pub fn value(&self) -> &Arc<[Arc<str>]> {
        &self.value
    }

    /// The single value of a plain feature.
    pub fn plain_value(&self) -> Option<&str> {
        match (&*self.key, self.value.first()) {
            (FeatureKey::Ns(_), Some(v)) => Some(v),
            _ => None,
        }
    }

    pub fn namespace(&self) -> Option<&str> {
        match &*self.key {
            FeatureKey::Ns(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &str {
        &self.repr
    }

    pub fn repr(&self) -> &Arc<str> {
        &self.repr
    }

    /// Splits a Cartesian feature into its left and right component features.
    pub fn split_cartesian(&self) -> Option<(Feature, Feature)> {
        match &*self.key {
            FeatureKey::Cart(l, r) => {
                let at = l.arity();
                let left = Self::assemble(Arc::clone(l), Arc::from(self.value[..at].to_vec()));
                let right = Self::assemble(Arc::clone(r), Arc::from(self.value[at..].to_vec()));
                Some((left, right))
            }
            _ => None,
        }
    }
}

impl PartialEq for Feature {
    fn eq(&self, other: &Self) -> bool {
        self.repr == other.repr
    }
}

impl Eq for Feature {}

impl Hash for Feature {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.repr.hash(state);
    }
}

impl PartialOrd for Feature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Feature {
    fn cmp(&self, other: &Self) -> Ordering {
        self.repr.cmp(&other.repr)
    }
}

impl fmt::Debug for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Feature({})", self.repr)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.repr)
    }
}

impl FromStr for Feature {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = |reason: &str| FeatureError::Malformed {
            text: s.to_string(),
            reason: reason.to_string(),
        };
        let (key_text, value_text) = s.split_once(':').ok_or_else(|| malformed("missing ':'"))?;
        let key: Arc<FeatureKey> = Arc::new(key_text.parse()?);
        let arity = key.arity();
        let value: Vec<Arc<str>> = if arity == 0 {
            if value_text != "1" {
                return Err(malformed("join features must carry the unit value 1"));
            }
            Vec::new()
        } else {
            let leaves = value_text
                .split('|')
                .map(|leaf| unescape(leaf).map(Arc::from).ok_or_else(|| malformed("bad escape")))
                .collect::<Result<Vec<_>, _>>()?;
            if leaves.len() != arity {
                return Err(FeatureError::Arity {
                    key: key.to_string(),
                    expected: arity,
                    found: leaves.len(),
                });
            }
            leaves
        };
        let feature = Self::assemble(key, Arc::from(value));
        // Non-canonical escapes (e.g. lowercase hex) would break injectivity.
        if &*feature.repr != s {
            return Err(malformed("non-canonical encoding"));
        }
        Ok(feature)
    }
}

fn escape_into(leaf: &str, out: &mut String) {
    for c in leaf.chars() {
        match c {
            ':' | '*' | '|' | '~' | '%' | '\t' | '\n' | '\r' => {
                let _ = write!(out, "%{:02X}", c as u32);
            }
            _ => out.push(c),
        }
    }
}

fn unescape(leaf: &str) -> Option<String> {
    let mut out = String::with_capacity(leaf.len());
    let mut chars = leaf.chars();
    while let Some(c) = chars.next() {
        if c == '%' {
            let hi = chars.next()?.to_digit(16)?;
            let lo = chars.next()?.to_digit(16)?;
            out.push(char::from_u32(hi * 16 + lo)?);
        } else {
            out.push(c);
        }
    }
    Some(out)
}

struct KeyParser<'a> {
    src: &'a str,
    pos: usize,
}

impl KeyParser<'_> {
    fn fail(&self, reason: &str) -> FeatureError {
        FeatureError::Malformed {
            text: self.src.to_string(),
            reason: format!("{reason} at byte {}", self.pos),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn key(&mut self) -> Result<FeatureKey, FeatureError> {
        let left = self.term()?;
        match self.peek() {
            Some(op @ (b'*' | b'~')) => {
                self.pos += 1;
                let right = Arc::new(self.term()?);
                let left = Arc::new(left);
                Ok(if op == b'*' {
                    FeatureKey::Cart(left, right)
                } else {
                    FeatureKey::Join(left, right)
                })
            }
            _ => Ok(left),
        }
    }

    fn term(&mut self) -> Result<FeatureKey, FeatureError> {
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let inner = self.key()?;
            if inner.is_plain() {
                return Err(self.fail("redundant parentheses around a namespace"));
            }
            if self.peek() != Some(b')') {
                return Err(self.fail("expected ')'"));
            }
            self.pos += 1;
            return Ok(inner);
        }
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.') {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(self.fail("expected namespace"));
        }
        Ok(FeatureKey::Ns(Arc::from(&self.src[start..self.pos])))
    }
}
