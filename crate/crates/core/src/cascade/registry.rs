//! Bookkeeping of every block Cascade has announced.
//!
//! Blocks of one iteration are contiguous ranges of that iteration's
//! permutation. Each block carries a binary tree of sub-blocks (heap-indexed,
//! root = 1, children `2h` and `2h + 1`, left child takes the ceiling half).
//! Alice's parity of a node becomes public once disclosed, and any node whose
//! parity follows from a parent/children triple is filled in as well.

use crate::bits::BitFrame;

/// Index of a block across all iterations.
pub type BlockId = u32;

/// A sub-block of a registered block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub block: BlockId,
    /// Heap index in the block's tree, root = 1.
    pub heap: u32,
}

impl NodeRef {
    pub fn root(block: BlockId) -> Self {
        NodeRef { block, heap: 1 }
    }

    pub fn left(self) -> Self {
        NodeRef {
            block: self.block,
            heap: 2 * self.heap,
        }
    }

    pub fn right(self) -> Self {
        NodeRef {
            block: self.block,
            heap: 2 * self.heap + 1,
        }
    }

    pub fn is_root(self) -> bool {
        self.heap == 1
    }
}

#[derive(Debug, Clone)]
struct Block {
    iteration: u32,
    start: u32,
    len: u32,
    knowledge_at: usize,
}

const UNKNOWN: u8 = 0;
const EVEN: u8 = 1;
const ODD: u8 = 2;

/// Partition tables and disclosed parities.
#[derive(Debug, Clone)]
pub struct BlockRegistry {
    n: usize,
    orders: Vec<Vec<u32>>,
    owners: Vec<Vec<BlockId>>,
    blocks: Vec<Block>,
    knowledge: Vec<u8>,
    /// Parity of Bob's current frame over each block; unused on Alice's side.
    bob_parity: Vec<bool>,
}

fn tree_slots(len: u32) -> usize {
    2 * (len as usize).next_power_of_two()
}

/// Offsets `[lo, hi)` covered by heap node `heap` in a block of `len` bits.
pub(crate) fn node_range(len: u32, heap: u32) -> (u32, u32) {
    let depth = 31 - heap.leading_zeros();
    let (mut lo, mut hi) = (0, len);
    for level in (0..depth).rev() {
        let mid = lo + (hi - lo).div_ceil(2);
        if (heap >> level) & 1 == 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

impl BlockRegistry {
    pub fn new(n: usize) -> Self {
        BlockRegistry {
            n,
            orders: Vec::new(),
            owners: Vec::new(),
            blocks: Vec::new(),
            knowledge: Vec::new(),
            bob_parity: Vec::new(),
        }
    }

    pub fn frame_len(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> usize {
        self.orders.len()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Registers a new iteration. `order` must be a permutation of `0..n` and
    /// `lengths` must sum to `n`; block `j` covers the next `lengths[j]`
    /// entries of `order`. `bob` (if given) seeds Bob's block parities.
    ///
    /// Returns the ids of the new blocks.
    pub fn add_iteration(
        &mut self,
        order: Vec<u32>,
        lengths: &[u32],
        bob: Option<&BitFrame>,
    ) -> std::ops::Range<BlockId> {
        assert_eq!(order.len(), self.n, "order must cover the frame");
        assert_eq!(
            lengths.iter().map(|&l| l as usize).sum::<usize>(),
            self.n,
            "block lengths must cover the frame"
        );
        let iteration = self.orders.len() as u32;
        let first = self.blocks.len() as BlockId;
        let mut owner = vec![BlockId::MAX; self.n];
        let mut start = 0u32;
        for &len in lengths {
            assert!(len > 0, "empty block");
            let id = self.blocks.len() as BlockId;
            for &pos in &order[start as usize..(start + len) as usize] {
                assert_eq!(owner[pos as usize], BlockId::MAX, "duplicate position {pos}");
                owner[pos as usize] = id;
            }
            let knowledge_at = self.knowledge.len();
            self.knowledge.resize(knowledge_at + tree_slots(len), UNKNOWN);
            let parity = bob.is_some_and(|y| {
                order[start as usize..(start + len) as usize]
                    .iter()
                    .fold(false, |acc, &p| acc ^ y.get(p as usize))
            });
            self.bob_parity.push(parity);
            self.blocks.push(Block {
                iteration,
                start,
                len,
                knowledge_at,
            });
            start += len;
        }
        self.orders.push(order);
        self.owners.push(owner);
        first..self.blocks.len() as BlockId
    }

    pub fn block_iteration(&self, block: BlockId) -> usize {
        self.blocks[block as usize].iteration as usize
    }

    pub fn block_len(&self, block: BlockId) -> usize {
        self.blocks[block as usize].len as usize
    }

    /// Frame positions covered by a node.
    pub fn positions(&self, node: NodeRef) -> &[u32] {
        let b = &self.blocks[node.block as usize];
        let (lo, hi) = node_range(b.len, node.heap);
        &self.orders[b.iteration as usize][(b.start + lo) as usize..(b.start + hi) as usize]
    }

    pub fn node_len(&self, node: NodeRef) -> usize {
        let (lo, hi) = node_range(self.blocks[node.block as usize].len, node.heap);
        (hi - lo) as usize
    }

    pub fn is_leaf(&self, node: NodeRef) -> bool {
        self.node_len(node) == 1
    }

    fn slot(&self, node: NodeRef) -> Option<usize> {
        let b = &self.blocks[node.block as usize];
        let h = node.heap as usize;
        if h == 0 || h >= tree_slots(b.len) {
            return None;
        }
        let (lo, hi) = node_range(b.len, node.heap);
        (hi > lo).then_some(b.knowledge_at + h)
    }

    /// Alice's parity of the node, if it is public.
    pub fn alice_parity(&self, node: NodeRef) -> Option<bool> {
        match self.knowledge[self.slot(node)?] {
            EVEN => Some(false),
            ODD => Some(true),
            _ => None,
        }
    }

    /// Records a disclosed parity and everything it implies.
    pub fn learn(&mut self, node: NodeRef, parity: bool) {
        let mut work = vec![(node, parity)];
        while let Some((node, parity)) = work.pop() {
            let Some(slot) = self.slot(node) else { continue };
            match self.knowledge[slot] {
                UNKNOWN => self.knowledge[slot] = if parity { ODD } else { EVEN },
                known => {
                    debug_assert_eq!(known == ODD, parity, "contradictory parity");
                    continue;
                }
            }
            // parent / sibling triple
            if !node.is_root() {
                let parent = NodeRef {
                    block: node.block,
                    heap: node.heap / 2,
                };
                let sibling = NodeRef {
                    block: node.block,
                    heap: node.heap ^ 1,
                };
                match (self.alice_parity(parent), self.alice_parity(sibling)) {
                    (Some(p), None) => work.push((sibling, p ^ parity)),
                    (None, Some(s)) => work.push((parent, s ^ parity)),
                    _ => {}
                }
            }
            // children triple
            if !self.is_leaf(node) {
                match (
                    self.alice_parity(node.left()),
                    self.alice_parity(node.right()),
                ) {
                    (Some(l), None) => work.push((node.right(), parity ^ l)),
                    (None, Some(r)) => work.push((node.left(), parity ^ r)),
                    _ => {}
                }
            }
        }
    }

    /// The block of iteration `iteration` containing `pos`.
    pub fn owner(&self, iteration: usize, pos: usize) -> BlockId {
        self.owners[iteration][pos]
    }

    pub fn bob_block_parity(&self, block: BlockId) -> bool {
        self.bob_parity[block as usize]
    }

    /// Whether Alice's and Bob's parities of the block disagree.
    pub fn is_odd(&self, block: BlockId) -> bool {
        self.alice_parity(NodeRef::root(block))
            .is_some_and(|a| a != self.bob_parity[block as usize])
    }

    /// Cascade step: Bob has toggled `corrected_bit`, so every block holding
    /// it flips parity. Returns the blocks that are now odd.
    pub fn cascade_step(&mut self, corrected_bit: usize) -> Vec<BlockId> {
        let mut odd = Vec::new();
        for it in 0..self.owners.len() {
            let b = self.owners[it][corrected_bit];
            self.bob_parity[b as usize] ^= true;
            if self.is_odd(b) {
                odd.push(b);
            }
        }
        odd
    }

    /// For every position, the length of the smallest node of its
    /// `iteration` block whose parity is public. Positions in blocks that
    /// were never announced get the block length.
    pub fn known_node_sizes(&self, iteration: usize) -> Vec<u32> {
        let mut sizes = vec![0u32; self.n];
        for (id, b) in self.blocks.iter().enumerate() {
            if b.iteration as usize != iteration {
                continue;
            }
            let root = NodeRef::root(id as BlockId);
            for &p in self.positions(root) {
                sizes[p as usize] = b.len;
            }
            let mut stack = vec![root];
            while let Some(node) = stack.pop() {
                if self.is_leaf(node) {
                    continue;
                }
                for child in [node.left(), node.right()] {
                    if self.alice_parity(child).is_some() {
                        let len = self.node_len(child) as u32;
                        for &p in self.positions(child) {
                            sizes[p as usize] = len;
                        }
                        stack.push(child);
                    }
                }
            }
        }
        sizes
    }
}
