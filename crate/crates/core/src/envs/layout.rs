use crate::error::{Error, Result};

pub const FOUR_ROOMS: &str = include_str!("../../layouts/four_rooms.txt");
pub const EIGHT_ROOMS: &str = include_str!("../../layouts/eight_rooms.txt");

/// Parsed ASCII gridworld map. Cells are indexed `row * width + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<bool>,
    pub doors: Vec<usize>,
    pub start: usize,
    pub target: usize,
    /// Portal entries in reading order.
    pub portal_entries: Vec<usize>,
    pub portal_exit: usize,
}

impl Layout {
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        let err = |line: usize, msg: String| Error::Parse { line, msg };
        let height = lines.len();
        let width = lines.first().map_or(0, |l| l.chars().count());
        if height == 0 || width == 0 {
            return Err(err(0, "empty layout".into()));
        }
        let mut walls = Vec::with_capacity(width * height);
        let (mut doors, mut entries) = (Vec::new(), Vec::new());
        let (mut start, mut target, mut exit) = (None, None, None);
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != width {
                return Err(err(r + 1, format!("row has {} cells, expected {width}", line.chars().count())));
            }
            for (c, ch) in line.chars().enumerate() {
                let cell = r * width + c;
                walls.push(ch == '#');
                let slot = match ch {
                    '#' | '.' => None,
                    'D' => {
                        doors.push(cell);
                        None
                    }
                    'P' => {
                        entries.push(cell);
                        None
                    }
                    'S' => Some(&mut start),
                    'T' => Some(&mut target),
                    'X' => Some(&mut exit),
                    other => return Err(err(r + 1, format!("unknown map symbol {other:?}"))),
                };
                if let Some(slot) = slot {
                    if slot.replace(cell).is_some() {
                        return Err(err(r + 1, format!("duplicate {ch:?}")));
                    }
                }
            }
        }
        let need = |v: Option<usize>, what: &str| v.ok_or_else(|| err(0, format!("layout has no {what}")));
        let layout = Self {
            width,
            height,
            walls,
            doors,
            start: need(start, "start")?,
            target: need(target, "target")?,
            portal_entries: entries,
            portal_exit: need(exit, "portal exit")?,
        };
        if layout.portal_entries.is_empty() {
            return Err(err(0, "layout has no portal entries".into()));
        }
        Ok(layout)
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn is_wall(&self, cell: usize) -> bool {
        self.walls[cell]
    }

    /// Neighbour in direction `action` (up, down, left, right), or the cell
    /// itself when blocked.
    pub fn neighbor(&self, cell: usize, action: usize) -> usize {
        let (r, c) = (cell / self.width, cell % self.width);
        let next = match action {
            0 if r > 0 => cell - self.width,
            1 if r + 1 < self.height => cell + self.width,
            2 if c > 0 => cell - 1,
            3 if c + 1 < self.width => cell + 1,
            _ => cell,
        };
        if self.walls[next] {
            cell
        } else {
            next
        }
    }

    /// Breadth-first distances over walkable cells, ignoring the portal.
    pub fn bfs_distances(&self, from: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_cells()];
        let mut queue = std::collections::VecDeque::from([from]);
        dist[from] = Some(0);
        while let Some(c) = queue.pop_front() {
            let d = dist[c].expect("queued cells have a distance");
            for a in 0..4 {
                let n = self.neighbor(c, a);
                if dist[n].is_none() {
                    dist[n] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_layouts_parse() {
        for (text, w, h) in [(FOUR_ROOMS, 12, 12), (EIGHT_ROOMS, 24, 12)] {
            let l = Layout::parse(text).unwrap();
            assert_eq!((l.width, l.height), (w, h));
            assert_eq!(l.portal_entries.len(), 20);
            let from_start = l.bfs_distances(l.start);
            // room 1 is sealed: the target is only reachable through the portal
            assert!(from_start[l.target].is_none());
            assert!(from_start[l.portal_exit].is_none());
            assert!(l.portal_entries.iter().all(|&e| from_start[e].is_some()));
            assert!(l.bfs_distances(l.portal_exit)[l.target].is_some());
        }
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(Layout::parse("#S#\n#T\n").is_err());
        assert!(Layout::parse("SPTQ\n").is_err());
        assert!(Layout::parse("SPT\n").is_err());
    }
}
