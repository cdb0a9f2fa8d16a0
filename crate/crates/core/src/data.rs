//! Interaction records, dense id vocabularies, per-user time-ordered streams
//! and the per-user chronological train/test split.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{ItemId, UserId};

/// Feedback value as it appears in a raw log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feedback {
    /// Explicit rating, binarized against a threshold.
    Rating(f64),
    /// Click flag from a pure click log.
    Click(bool),
}

/// One parsed log line, ids still in their raw string form.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub user: String,
    pub item: String,
    pub feedback: Feedback,
    pub timestamp: i64,
}

/// A binarized event with raw ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawInteraction {
    pub user: String,
    pub item: String,
    pub clicked: bool,
    pub timestamp: i64,
}

/// A binarized event with dense ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub user: UserId,
    pub item: ItemId,
    pub clicked: bool,
    pub timestamp: i64,
}

/// One entry of a user's stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub item: ItemId,
    pub clicked: bool,
    pub timestamp: i64,
    /// Position of the event in the ingested input; used to restore input
    /// order when a dataset is flattened.
    pub row: u64,
}

/// `clicked = rating > positive_threshold`; click flags pass through.
/// Preserves count and order.
pub fn binarize(records: &[RawRecord], positive_threshold: f64) -> Vec<RawInteraction> {
    records
        .iter()
        .map(|r| RawInteraction {
            user: r.user.clone(),
            item: r.item.clone(),
            clicked: match r.feedback {
                Feedback::Rating(x) => x > positive_threshold,
                Feedback::Click(c) => c,
            },
            timestamp: r.timestamp,
        })
        .collect()
}

/// Bijection between raw string ids and dense ids `0..len`, numbered by
/// first occurrence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    to_dense: BTreeMap<String, u32>,
    to_raw: Vec<String>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Identity-like vocabulary `prefix0, prefix1, ...`.
    pub fn sequential(prefix: &str, n: usize) -> Self {
        let mut v = Vocab::new();
        for i in 0..n {
            v.intern(&alloc::format!("{prefix}{i}"));
        }
        v
    }

    pub fn intern(&mut self, raw: &str) -> u32 {
        if let Some(&id) = self.to_dense.get(raw) {
            return id;
        }
        let id = self.to_raw.len() as u32;
        self.to_dense.insert(String::from(raw), id);
        self.to_raw.push(String::from(raw));
        id
    }

    pub fn get(&self, raw: &str) -> Option<u32> {
        self.to_dense.get(raw).copied()
    }

    pub fn raw(&self, id: u32) -> Option<&str> {
        self.to_raw.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.to_raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_raw.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.to_raw.iter().map(String::as_str)
    }
}

/// Per-user event streams sorted by `(timestamp, input order)`.
///
/// The vocabularies cover every id ever indexed; users removed by
/// [`temporal_split`] keep their dense id but have an empty stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    users: Vocab,
    items: Vocab,
    streams: Vec<Vec<Event>>,
}

impl Dataset {
    /// Assembles a dataset from already-dense parts. Streams are stably
    /// sorted by timestamp.
    pub fn from_streams(users: Vocab, items: Vocab, mut streams: Vec<Vec<Event>>) -> Result<Self> {
        if streams.len() != users.len() {
            return Err(Error::invalid("one stream per user is required"));
        }
        for s in &mut streams {
            if s.iter().any(|e| e.item as usize >= items.len()) {
                return Err(Error::invalid("stream references an unknown item"));
            }
            s.sort_by_key(|e| e.timestamp);
        }
        Ok(Dataset { users, items, streams })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn users(&self) -> &Vocab {
        &self.users
    }

    pub fn items(&self) -> &Vocab {
        &self.items
    }

    pub fn stream(&self, u: UserId) -> &[Event] {
        &self.streams[u as usize]
    }

    pub fn streams(&self) -> impl Iterator<Item = (UserId, &[Event])> {
        self.streams.iter().enumerate().map(|(u, s)| (u as UserId, s.as_slice()))
    }

    pub fn n_events(&self) -> usize {
        self.streams.iter().map(Vec::len).sum()
    }

    /// Users with a non-empty stream.
    pub fn active_users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.streams()
            .filter(|(_, s)| !s.is_empty())
            .map(|(u, _)| u)
    }

    /// Every event as a dense [`Interaction`], in original input order.
    pub fn interactions(&self) -> Vec<Interaction> {
        let mut rows: Vec<(u64, Interaction)> = self
            .streams()
            .flat_map(|(u, s)| {
                s.iter().map(move |e| {
                    (
                        e.row,
                        Interaction {
                            user: u,
                            item: e.item,
                            clicked: e.clicked,
                            timestamp: e.timestamp,
                        },
                    )
                })
            })
            .collect();
        rows.sort_by_key(|(row, _)| *row);
        rows.into_iter().map(|(_, i)| i).collect()
    }

    /// Every event with raw ids, in original input order.
    pub fn flatten(&self) -> Vec<RawInteraction> {
        self.interactions()
            .into_iter()
            .map(|i| RawInteraction {
                user: String::from(self.users.raw(i.user).unwrap_or_default()),
                item: String::from(self.items.raw(i.item).unwrap_or_default()),
                clicked: i.clicked,
                timestamp: i.timestamp,
            })
            .collect()
    }

    /// Same vocabularies, different streams.
    pub(crate) fn with_streams(&self, streams: Vec<Vec<Event>>) -> Dataset {
        Dataset {
            users: self.users.clone(),
            items: self.items.clone(),
            streams,
        }
    }

    /// Appends a new user with the given stream; the raw id must be fresh.
    pub(crate) fn push_user(&mut self, raw: &str, stream: Vec<Event>) -> Result<UserId> {
        if self.users.get(raw).is_some() {
            return Err(Error::InvalidArgument(alloc::format!("user {raw} already exists")));
        }
        let id = self.users.intern(raw);
        self.streams.push(stream);
        Ok(id)
    }

    /// One past the largest `row` of any event.
    pub(crate) fn next_row(&self) -> u64 {
        self.streams.iter().flatten().map(|e| e.row + 1).max().unwrap_or(0)
    }

    pub(crate) fn into_parts(self) -> (Vocab, Vocab, Vec<Vec<Event>>) {
        (self.users, self.items, self.streams)
    }
}

/// Remaps raw ids to dense ids (first-occurrence order) and groups events
/// into per-user streams, stably sorted by timestamp. Duplicates are kept.
pub fn build_index(interactions: &[RawInteraction]) -> Dataset {
    let mut users = Vocab::new();
    let mut items = Vocab::new();
    let mut streams: Vec<Vec<Event>> = Vec::new();
    for (row, r) in interactions.iter().enumerate() {
        let u = users.intern(&r.user) as usize;
        let i = items.intern(&r.item);
        if u == streams.len() {
            streams.push(Vec::new());
        }
        streams[u].push(Event {
            item: i,
            clicked: r.clicked,
            timestamp: r.timestamp,
            row: row as u64,
        });
    }
    for s in &mut streams {
        s.sort_by_key(|e| e.timestamp);
    }
    Dataset { users, items, streams }
}

/// Indexes two record sets under a shared vocabulary (first `train`, then
/// `test`), returning the two datasets separately.
pub fn build_index_pair(train: &[RawInteraction], test: &[RawInteraction]) -> (Dataset, Dataset) {
    let mut all = Vec::with_capacity(train.len() + test.len());
    all.extend_from_slice(train);
    all.extend_from_slice(test);
    let joint = build_index(&all);
    let cut = train.len() as u64;
    let (users, items, streams) = joint.into_parts();
    let (mut tr, mut te) = (Vec::with_capacity(streams.len()), Vec::with_capacity(streams.len()));
    for s in streams {
        let (a, b): (Vec<Event>, Vec<Event>) = s.into_iter().partition(|e| e.row < cut);
        tr.push(a);
        te.push(b);
    }
    let train = Dataset {
        users: users.clone(),
        items: items.clone(),
        streams: tr,
    };
    let test = Dataset { users, items, streams: te };
    (train, test)
}

/// Per-user chronological split: the last `ceil(test_fraction * n_u)` events
/// of each user go to test. Users left with an empty side are emptied in
/// both outputs. Vocabularies are shared and unchanged.
pub fn temporal_split(dataset: &Dataset, test_fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test_fraction must lie in (0, 1)"));
    }
    let mut train = Vec::with_capacity(dataset.n_users());
    let mut test = Vec::with_capacity(dataset.n_users());
    for (_, s) in dataset.streams() {
        let n = s.len();
        let n_test = ceil_fraction(test_fraction, n);
        if n_test == 0 || n_test >= n {
            train.push(Vec::new());
            test.push(Vec::new());
        } else {
            train.push(s[..n - n_test].to_vec());
            test.push(s[n - n_test..].to_vec());
        }
    }
    Ok((dataset.with_streams(train), dataset.with_streams(test)))
}

/// `ceil(q * n)`, snapping products within rounding error of an integer.
pub(crate) fn ceil_fraction(q: f64, n: usize) -> usize {
    let x = q * n as f64;
    let r = libm::round(x);
    if (x - r).abs() <= 1e-9 * (1.0 + r.abs()) {
        r as usize
    } else {
        libm::ceil(x) as usize
    }
}
