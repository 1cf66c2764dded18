use std::fmt;

use serde::{Deserialize, Serialize};

pub type Value = i64;

/// Index into a program's declared location table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Loc(pub u16);

impl Loc {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Thread identifiers start at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ThreadId(pub u32);

impl ThreadId {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Self {
        ThreadId(i as u32 + 1)
    }
}

impl fmt::Display for ThreadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    R,
    W,
    #[serde(rename = "RMW")]
    Rmw,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::R => "R",
            Kind::W => "W",
            Kind::Rmw => "RMW",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventLabel {
    Read { loc: Loc, val: Value },
    Write { loc: Loc, val: Value },
    Rmw { loc: Loc, read: Value, write: Value },
}

impl EventLabel {
    pub fn kind(&self) -> Kind {
        match self {
            EventLabel::Read { .. } => Kind::R,
            EventLabel::Write { .. } => Kind::W,
            EventLabel::Rmw { .. } => Kind::Rmw,
        }
    }

    pub fn loc(&self) -> Loc {
        match *self {
            EventLabel::Read { loc, .. } | EventLabel::Write { loc, .. } | EventLabel::Rmw { loc, .. } => loc,
        }
    }

    pub fn val_r(&self) -> Option<Value> {
        match *self {
            EventLabel::Read { val, .. } => Some(val),
            EventLabel::Rmw { read, .. } => Some(read),
            EventLabel::Write { .. } => None,
        }
    }

    pub fn val_w(&self) -> Option<Value> {
        match *self {
            EventLabel::Write { val, .. } => Some(val),
            EventLabel::Rmw { write, .. } => Some(write),
            EventLabel::Read { .. } => None,
        }
    }

    /// Member of the read set, which includes RMWs.
    pub fn is_read(&self) -> bool {
        !matches!(self, EventLabel::Write { .. })
    }

    /// Member of the write set, which includes RMWs.
    pub fn is_write(&self) -> bool {
        !matches!(self, EventLabel::Read { .. })
    }

    pub fn is_rmw(&self) -> bool {
        matches!(self, EventLabel::Rmw { .. })
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> LabelDisplay<'a> {
        LabelDisplay { label: self, names }
    }
}

pub struct LabelDisplay<'a> {
    label: &'a EventLabel,
    names: &'a [String],
}

impl fmt::Display for LabelDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |l: Loc| {
            self.names
                .get(l.index())
                .cloned()
                .unwrap_or_else(|| format!("#{}", l.0))
        };
        match *self.label {
            EventLabel::Read { loc, val } => write!(f, "R({},{})", name(loc), val),
            EventLabel::Write { loc, val } => write!(f, "W({},{})", name(loc), val),
            EventLabel::Rmw { loc, read, write } => write!(f, "RMW({},{},{})", name(loc), read, write),
        }
    }
}

/// Event identity: initialisation writes are keyed by location, all other
/// events by thread and serial number. The derived order puts every init
/// event first and then sorts by (tid, sn).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventId {
    Init(Loc),
    Thread { tid: ThreadId, sn: u32 },
}

impl EventId {
    pub fn thread(tid: ThreadId, sn: u32) -> Self {
        EventId::Thread { tid, sn }
    }

    pub fn is_init(&self) -> bool {
        matches!(self, EventId::Init(_))
    }

    pub fn tid(&self) -> Option<ThreadId> {
        match *self {
            EventId::Thread { tid, .. } => Some(tid),
            EventId::Init(_) => None,
        }
    }

    pub fn sn(&self) -> Option<u32> {
        match *self {
            EventId::Thread { sn, .. } => Some(sn),
            EventId::Init(_) => None,
        }
    }

    /// Program order between two event identities.
    pub fn po_before(&self, other: &EventId) -> bool {
        match (self, other) {
            (EventId::Init(_), EventId::Thread { .. }) => true,
            (EventId::Thread { tid: t1, sn: s1 }, EventId::Thread { tid: t2, sn: s2 }) => t1 == t2 && s1 < s2,
            _ => false,
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> IdDisplay<'a> {
        IdDisplay { id: self, names }
    }
}

pub struct IdDisplay<'a> {
    id: &'a EventId,
    names: &'a [String],
}

impl fmt::Display for IdDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self.id {
            EventId::Init(l) => match self.names.get(l.index()) {
                Some(n) => write!(f, "init:{n}"),
                None => write!(f, "init:#{}", l.0),
            },
            EventId::Thread { tid, sn } => write!(f, "{}.{}", tid.0, sn),
        }
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EventId::Init(l) => write!(f, "init:#{}", l.0),
            EventId::Thread { tid, sn } => write!(f, "{}.{}", tid.0, sn),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accessors_follow_label_kind() {
        let x = Loc(0);
        let r = EventLabel::Read { loc: x, val: 3 };
        let w = EventLabel::Write { loc: x, val: 4 };
        let u = EventLabel::Rmw { loc: x, read: 1, write: 2 };
        assert_eq!((r.val_r(), r.val_w()), (Some(3), None));
        assert_eq!((w.val_r(), w.val_w()), (None, Some(4)));
        assert_eq!((u.val_r(), u.val_w()), (Some(1), Some(2)));
        assert!(r.is_read() && !r.is_write());
        assert!(w.is_write() && !w.is_read());
        assert!(u.is_read() && u.is_write() && u.is_rmw());
    }

    #[test]
    fn init_events_sort_first() {
        let a = EventId::Init(Loc(3));
        let b = EventId::thread(ThreadId(1), 0);
        let c = EventId::thread(ThreadId(1), 1);
        let d = EventId::thread(ThreadId(2), 0);
        let mut v = vec![d, c, b, a];
        v.sort();
        assert_eq!(v, vec![a, b, c, d]);
        assert!(a.po_before(&d) && b.po_before(&c) && !b.po_before(&d) && !d.po_before(&a));
    }
}
