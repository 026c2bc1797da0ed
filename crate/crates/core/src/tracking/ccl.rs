//! Two-pass connected-component labelling with union-find, 8-connectivity.

use crate::blob::mask::Bitmap;
use crate::tracking::{Blob, MbRect};

pub const DEFAULT_MIN_CELLS: usize = 2;

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.parent.len() - 1
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller label as root so numbering follows raster order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Label 8-connected components; returns a per-cell label (`None` for background)
/// and the number of components. Labels follow raster order of first appearance.
pub fn label_components(bitmap: &Bitmap) -> (Vec<Option<usize>>, usize) {
    let (w, h) = (bitmap.width, bitmap.height);
    let mut provisional: Vec<Option<usize>> = vec![None; w * h];
    let mut sets = DisjointSet::new();

    for y in 0..h {
        for x in 0..w {
            if !bitmap.get(x, y) {
                continue;
            }
            // already-visited neighbours: W, NW, N, NE
            let mut neighbours = [None; 4];
            if x > 0 {
                neighbours[0] = provisional[y * w + x - 1];
            }
            if y > 0 {
                if x > 0 {
                    neighbours[1] = provisional[(y - 1) * w + x - 1];
                }
                neighbours[2] = provisional[(y - 1) * w + x];
                if x + 1 < w {
                    neighbours[3] = provisional[(y - 1) * w + x + 1];
                }
            }
            let label = match neighbours.iter().flatten().min() {
                Some(&l) => {
                    for &n in neighbours.iter().flatten() {
                        sets.union(l, n);
                    }
                    l
                }
                None => sets.make(),
            };
            provisional[y * w + x] = Some(label);
        }
    }

    let mut remap = vec![usize::MAX; sets.parent.len()];
    let mut next = 0;
    let labels = provisional
        .into_iter()
        .map(|p| {
            p.map(|l| {
                let root = sets.find(l);
                if remap[root] == usize::MAX {
                    remap[root] = next;
                    next += 1;
                }
                remap[root]
            })
        })
        .collect();
    (labels, next)
}

/// One [`Blob`] per 8-connected component with at least `min_cells` cells.
pub fn connected_components(bitmap: &Bitmap, frame_index: usize, min_cells: usize) -> Vec<Blob> {
    let (labels, n) = label_components(bitmap);
    let w = bitmap.width;
    // (min_x, min_y, max_x, max_y, count)
    let mut stats = vec![(usize::MAX, usize::MAX, 0usize, 0usize, 0usize); n];
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = *l {
            let (x, y) = (i % w, i / w);
            let s = &mut stats[l];
            s.0 = s.0.min(x);
            s.1 = s.1.min(y);
            s.2 = s.2.max(x);
            s.3 = s.3.max(y);
            s.4 += 1;
        }
    }
    stats
        .into_iter()
        .filter(|s| s.4 >= min_cells.max(1))
        .map(|(x0, y0, x1, y1, cells)| {
            let bbox_mb = MbRect { col: x0, row: y0, cols: x1 - x0 + 1, rows: y1 - y0 + 1 };
            Blob { frame_index, bbox_mb, bbox_px: bbox_mb.to_px(), cells }
        })
        .collect()
}
