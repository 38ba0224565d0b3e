use rand::Rng;

use super::layout::{Layout, EIGHT_ROOMS, FOUR_ROOMS};
use super::{Environment, TabularMdp};
use crate::error::{invalid, Error, Result};

/// Which portal entry the observed state carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PortalObservation {
    /// The entry id until the agent teleports, a shared "used" slot after.
    #[default]
    UntilTeleport,
    /// The entry id for the whole episode.
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoomsState {
    pub cell: usize,
    pub entry: usize,
    pub teleported: bool,
    pub reached: bool,
    pub t: usize,
}

/// Gridworld with a portal from room 1 into room 2. Observed states are
/// `cell + n_cells * slot` where `slot` is the active entry id, or
/// `n_entries` once the portal has been used (see [`PortalObservation`]).
#[derive(Debug, Clone)]
pub struct RoomsEnv {
    pub layout: Layout,
    pub slip: f64,
    pub horizon: usize,
    pub observation: PortalObservation,
    /// Cells reachable from the start without the portal.
    first_room: Vec<bool>,
}

pub const ACTIONS: [&str; 4] = ["up", "down", "left", "right"];

impl RoomsEnv {
    pub fn new(layout: Layout, slip: f64, horizon: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&slip) {
            return invalid(format!("slip {slip} not in [0, 1]"));
        }
        if horizon == 0 {
            return invalid("horizon must be positive");
        }
        let dist = layout.bfs_distances(layout.start);
        if dist[layout.target].is_some() {
            return invalid("target is reachable from the start without the portal");
        }
        if layout.bfs_distances(layout.portal_exit)[layout.target].is_none() {
            return invalid("target is not reachable from the portal exit");
        }
        if let Some(e) = layout.portal_entries.iter().find(|&&e| dist[e].is_none()) {
            return invalid(format!("portal entry {e} is not reachable from the start"));
        }
        let first_room = dist.iter().map(Option::is_some).collect();
        Ok(Self {
            layout,
            slip,
            horizon,
            observation: PortalObservation::default(),
            first_room,
        })
    }

    pub fn four_rooms(slip: f64) -> Result<Self> {
        Self::new(Layout::parse(FOUR_ROOMS)?, slip, 200)
    }

    pub fn eight_rooms(slip: f64) -> Result<Self> {
        Self::new(Layout::parse(EIGHT_ROOMS)?, slip, 200)
    }

    pub fn with_observation(mut self, mode: PortalObservation) -> Self {
        self.observation = mode;
        self
    }

    pub fn n_entries(&self) -> usize {
        self.layout.portal_entries.len()
    }

    fn n_cells(&self) -> usize {
        self.layout.n_cells()
    }

    fn slot(&self, entry: usize, teleported: bool) -> usize {
        match self.observation {
            PortalObservation::UntilTeleport if teleported => self.n_entries(),
            _ => entry,
        }
    }

    pub fn encode(&self, cell: usize, slot: usize) -> usize {
        cell + self.n_cells() * slot
    }

    /// `(cell, slot)` of an observed state.
    pub fn decode(&self, obs: usize) -> (usize, usize) {
        (obs % self.n_cells(), obs / self.n_cells())
    }

    pub fn is_first_room(&self, cell: usize) -> bool {
        self.first_room[cell]
    }

    /// Cell after moving in `dir` and taking the portal if it is the
    /// active entry.
    fn moved(&self, cell: usize, dir: usize, entry: Option<usize>) -> (usize, bool) {
        let next = self.layout.neighbor(cell, dir);
        match entry {
            Some(e) if self.layout.portal_entries[e] == next => (self.layout.portal_exit, true),
            _ => (next, false),
        }
    }

    /// Direction actually taken: the intended one, or with probability
    /// `slip` one of the other three.
    fn slip_direction<R: Rng + ?Sized>(&self, action: usize, rng: &mut R) -> usize {
        if self.slip > 0.0 && rng.random::<f64>() < self.slip {
            let k = rng.random_range(0..3);
            if k >= action {
                k + 1
            } else {
                k
            }
        } else {
            action
        }
    }

    /// Shortest number of steps from the start to the target via `entry`.
    pub fn shortest_path(&self, entry: usize) -> usize {
        let l = &self.layout;
        let to_entry = l.bfs_distances(l.start)[l.portal_entries[entry]].expect("entry reachable");
        let to_target = l.bfs_distances(l.portal_exit)[l.target].expect("target reachable");
        to_entry + to_target
    }
}

impl Environment for RoomsEnv {
    type State = RoomsState;

    fn n_states(&self) -> usize {
        self.n_cells() * (self.n_entries() + 1)
    }

    fn n_actions(&self) -> usize {
        4
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> RoomsState {
        RoomsState {
            cell: self.layout.start,
            entry: rng.random_range(0..self.n_entries()),
            teleported: false,
            reached: false,
            t: 0,
        }
    }

    fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> RoomsState {
        let cell = loop {
            let c = rng.random_range(0..self.n_cells());
            if !self.layout.is_wall(c) && c != self.layout.target {
                break c;
            }
        };
        RoomsState {
            cell,
            entry: rng.random_range(0..self.n_entries()),
            teleported: !self.first_room[cell],
            reached: false,
            t: 0,
        }
    }

    fn step<R: Rng + ?Sized>(&self, state: &mut RoomsState, action: usize, rng: &mut R) -> Result<(f64, bool)> {
        if state.t >= self.horizon {
            return Err(Error::Contract("step on a finished episode".into()));
        }
        if action >= 4 {
            return invalid(format!("action {action} out of range"));
        }
        if !state.reached {
            let dir = self.slip_direction(action, rng);
            let entry = (!state.teleported).then_some(state.entry);
            let (cell, jumped) = self.moved(state.cell, dir, entry);
            state.cell = cell;
            state.teleported |= jumped;
            state.reached = cell == self.layout.target;
        }
        state.t += 1;
        let done = state.t == self.horizon;
        let reward = if done && state.reached { 1.0 } else { 0.0 };
        Ok((reward, done))
    }

    fn observe(&self, state: &RoomsState) -> usize {
        self.encode(state.cell, self.slot(state.entry, state.teleported))
    }

    fn cluster_key(&self, obs: usize) -> usize {
        obs % self.n_cells()
    }

    fn n_cluster_keys(&self) -> usize {
        self.n_cells()
    }

    fn is_success(&self, state: &RoomsState) -> bool {
        state.reached
    }

    /// Success model: entering the target pays 1 and ends the episode.
    fn mdp(&self) -> TabularMdp {
        let n = self.n_states();
        let ne = self.n_entries();
        let mut transitions = vec![Vec::new(); n];
        let mut terminal = vec![false; n];
        for (obs, per_action) in transitions.iter_mut().enumerate() {
            let (cell, slot) = self.decode(obs);
            if self.layout.is_wall(cell) || cell == self.layout.target {
                terminal[obs] = true;
                continue;
            }
            let teleported = slot == ne;
            // in Always mode the slot is the entry; the first room tells
            // whether the portal has been used
            let teleported = teleported || !self.first_room[cell];
            let entry = (!teleported).then_some(slot.min(ne - 1));
            *per_action = (0..4)
                .map(|a| {
                    let mut outs: Vec<(usize, f64, f64)> = Vec::new();
                    for dir in 0..4 {
                        let p = if dir == a { 1.0 - self.slip } else { self.slip / 3.0 };
                        if p == 0.0 {
                            continue;
                        }
                        let (next, jumped) = self.moved(cell, dir, entry);
                        let next_obs = self.encode(next, self.slot(slot.min(ne - 1), teleported || jumped));
                        let r = if next == self.layout.target { 1.0 } else { 0.0 };
                        match outs.iter_mut().find(|o| o.0 == next_obs) {
                            Some(o) => o.1 += p,
                            None => outs.push((next_obs, p, r)),
                        }
                    }
                    outs
                })
                .collect();
        }
        TabularMdp {
            n_states: n,
            n_actions: 4,
            transitions,
            terminal,
        }
    }
}
