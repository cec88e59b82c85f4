/// Residency set over dense page ids, kept in least-recently-used order.
#[derive(Debug, Clone, Default)]
pub(crate) struct Lru {
    prev: Vec<u32>,
    next: Vec<u32>,
    resident: Vec<bool>,
    head: u32,
    tail: u32,
    len: usize,
}

const NIL: u32 = u32::MAX;

impl Lru {
    pub fn new() -> Self {
        Self {
            head: NIL,
            tail: NIL,
            ..Default::default()
        }
    }

    fn ensure(&mut self, page: u32) {
        let need = page as usize + 1;
        if self.resident.len() < need {
            self.prev.resize(need, NIL);
            self.next.resize(need, NIL);
            self.resident.resize(need, false);
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn contains(&self, page: u32) -> bool {
        self.resident.get(page as usize).copied().unwrap_or(false)
    }

    fn unlink(&mut self, page: u32) {
        let (p, n) = (self.prev[page as usize], self.next[page as usize]);
        if p == NIL {
            self.head = n;
        } else {
            self.next[p as usize] = n;
        }
        if n == NIL {
            self.tail = p;
        } else {
            self.prev[n as usize] = p;
        }
    }

    fn push_back(&mut self, page: u32) {
        self.prev[page as usize] = self.tail;
        self.next[page as usize] = NIL;
        if self.tail == NIL {
            self.head = page;
        } else {
            self.next[self.tail as usize] = page;
        }
        self.tail = page;
    }

    /// Marks `page` most recently used; returns true if it was not resident.
    pub fn touch(&mut self, page: u32) -> bool {
        self.ensure(page);
        if self.resident[page as usize] {
            self.unlink(page);
            self.push_back(page);
            false
        } else {
            self.resident[page as usize] = true;
            self.len += 1;
            self.push_back(page);
            true
        }
    }

    pub fn remove(&mut self, page: u32) -> bool {
        if !self.contains(page) {
            return false;
        }
        self.unlink(page);
        self.resident[page as usize] = false;
        self.len -= 1;
        true
    }

    pub fn pop_lru(&mut self) -> Option<u32> {
        let page = self.head;
        if page == NIL {
            return None;
        }
        self.remove(page);
        Some(page)
    }

    /// Least recently used first.
    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        let mut cur = self.head;
        std::iter::from_fn(move || {
            (cur != NIL).then(|| {
                let p = cur;
                cur = self.next[p as usize];
                p
            })
        })
    }
}
