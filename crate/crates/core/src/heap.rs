//! Indexed binary min-heap with in-place priority updates.

use crate::scalar::Scalar;

const ABSENT: usize = usize::MAX;

/// Min-heap over item ids `0..capacity`. Equal priorities pop the smaller id
/// first.
#[derive(Clone, Debug)]
pub struct PriorityTree<T> {
    heap: Vec<usize>,
    pos: Vec<usize>,
    prio: Vec<T>,
}

impl<T: Scalar> PriorityTree<T> {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            heap: Vec::with_capacity(capacity),
            pos: vec![ABSENT; capacity],
            prio: vec![T::zero(); capacity],
        }
    }

    /// Heap of `items`, built in linear time.
    pub fn from_items(capacity: usize, items: impl IntoIterator<Item = (usize, T)>) -> Self {
        let mut t = Self::with_capacity(capacity);
        for (id, p) in items {
            assert!(t.pos[id] == ABSENT, "duplicate item {id}");
            t.pos[id] = t.heap.len();
            t.heap.push(id);
            t.prio[id] = p;
        }
        for i in (0..t.heap.len() / 2).rev() {
            t.sift_down(i);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.pos.len() && self.pos[id] != ABSENT
    }

    pub fn priority(&self, id: usize) -> Option<T> {
        self.contains(id).then(|| self.prio[id])
    }

    pub fn peek(&self) -> Option<(usize, T)> {
        self.heap.first().map(|&id| (id, self.prio[id]))
    }

    pub fn push(&mut self, id: usize, p: T) {
        assert!(!self.contains(id), "item {id} already queued");
        self.prio[id] = p;
        self.pos[id] = self.heap.len();
        self.heap.push(id);
        self.sift_up(self.heap.len() - 1);
    }

    pub fn pop(&mut self) -> Option<(usize, T)> {
        let top = *self.heap.first()?;
        self.remove_at(0);
        Some((top, self.prio[top]))
    }

    pub fn remove(&mut self, id: usize) -> Option<T> {
        if !self.contains(id) {
            return None;
        }
        self.remove_at(self.pos[id]);
        Some(self.prio[id])
    }

    /// Sets the priority of a queued item, moving it either way.
    pub fn update(&mut self, id: usize, p: T) {
        assert!(self.contains(id), "item {id} not queued");
        let old = self.prio[id];
        self.prio[id] = p;
        let i = self.pos[id];
        if p < old {
            self.sift_up(i);
        } else {
            self.sift_down(i);
        }
    }

    fn remove_at(&mut self, i: usize) {
        let last = self.heap.len() - 1;
        self.swap(i, last);
        let id = self.heap.pop().expect("nonempty");
        self.pos[id] = ABSENT;
        if i < self.heap.len() {
            self.sift_down(i);
            self.sift_up(i);
        }
    }

    #[inline]
    fn less(&self, a: usize, b: usize) -> bool {
        let (ia, ib) = (self.heap[a], self.heap[b]);
        let (pa, pb) = (self.prio[ia], self.prio[ib]);
        pa < pb || (pa == pb && ia < ib)
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.pos[self.heap[a]] = a;
        self.pos[self.heap[b]] = b;
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.less(i, parent) {
                self.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            let r = l + 1;
            let mut m = i;
            if l < n && self.less(l, m) {
                m = l;
            }
            if r < n && self.less(r, m) {
                m = r;
            }
            if m == i {
                break;
            }
            self.swap(i, m);
            i = m;
        }
    }
}
