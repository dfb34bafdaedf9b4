//! Indexed binary max-heap over variables, keyed by an external activity array.

const ABSENT: u32 = u32::MAX;

#[derive(Debug, Clone, Default)]
pub(crate) struct VarHeap {
    heap: Vec<u32>,
    position: Vec<u32>,
}

impl VarHeap {
    pub fn grow(&mut self, num_vars: usize) {
        if self.position.len() < num_vars {
            self.position.resize(num_vars, ABSENT);
        }
    }

    #[inline]
    pub fn contains(&self, v: u32) -> bool {
        self.position[v as usize] != ABSENT
    }

    pub fn insert(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        let i = self.heap.len();
        self.heap.push(v);
        self.position[v as usize] = i as u32;
        self.sift_up(i, act);
    }

    /// Restores the heap property after `v`'s activity increased.
    pub fn bumped(&mut self, v: u32, act: &[f64]) {
        if let Some(&p) = self.position.get(v as usize) {
            if p != ABSENT {
                self.sift_up(p as usize, act);
            }
        }
    }

    pub fn pop_max(&mut self, act: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("non-empty");
        self.position[top as usize] = ABSENT;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last as usize] = 0;
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let pv = self.heap[parent];
            if act[pv as usize] >= act[v as usize] {
                break;
            }
            self.heap[i] = pv;
            self.position[pv as usize] = i as u32;
            i = parent;
        }
        self.heap[i] = v;
        self.position[v as usize] = i as u32;
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let left = 2 * i + 1;
            if left >= n {
                break;
            }
            let right = left + 1;
            let child = if right < n && act[self.heap[right] as usize] > act[self.heap[left] as usize] {
                right
            } else {
                left
            };
            let cv = self.heap[child];
            if act[cv as usize] <= act[v as usize] {
                break;
            }
            self.heap[i] = cv;
            self.position[cv as usize] = i as u32;
            i = child;
        }
        self.heap[i] = v;
        self.position[v as usize] = i as u32;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_activity_order() {
        let act = vec![0.5, 3.0, 1.0, 2.0, 0.0];
        let mut h = VarHeap::default();
        h.grow(5);
        for v in 0..5 {
            h.insert(v, &act);
        }
        let order: Vec<u32> = std::iter::from_fn(|| h.pop_max(&act)).collect();
        assert_eq!(order, vec![1, 3, 2, 0, 4]);
    }

    #[test]
    fn bump_moves_variable_up() {
        let mut act = vec![1.0, 2.0, 3.0];
        let mut h = VarHeap::default();
        h.grow(3);
        for v in 0..3 {
            h.insert(v, &act);
        }
        act[0] = 10.0;
        h.bumped(0, &act);
        assert_eq!(h.pop_max(&act), Some(0));
    }
}
