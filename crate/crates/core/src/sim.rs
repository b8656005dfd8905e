//! The PPHPC model on a toroidal grid.
//!
//! One iteration is `move -> grow food -> act -> collect`. All randomness
//! comes from a single seeded stream, consumed in this order:
//!
//! 1. initialization: for each prey, then each predator, draw `x`, `y` and
//!    the initial energy; then draw every cell countdown in row-major order;
//! 2. move phase: one direction draw (0..4) per agent in storage order;
//! 3. act phase: a Fisher-Yates shuffle of the agents alive at phase start,
//!    then, per visited agent, a victim draw (predators on a cell with prey)
//!    and a reproduction draw (0..100) when its energy exceeds the threshold.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::params::{ParamError, SimParams};
use crate::rng::{rng_from_seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Prey,
    Predator,
}

impl AgentKind {
    fn slot(self) -> usize {
        match self {
            AgentKind::Prey => 0,
            AgentKind::Predator => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Agent {
    pub kind: AgentKind,
    /// Positive while the agent is alive. Dead agents are dropped at the end
    /// of the phase in which they die.
    pub energy: i64,
    pub x: u32,
    pub y: u32,
}

/// Rule switches. The default is the full model; the switches exist to
/// produce deliberately wrong variants for validation experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ruleset {
    pub predation: bool,
}

impl Default for Ruleset {
    fn default() -> Self {
        Ruleset { predation: true }
    }
}

/// Population events recorded while running phases.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepEvents {
    pub births: [u64; 2],
    pub starvation: [u64; 2],
    /// Prey removed by predators.
    pub predation: u64,
}

impl StepEvents {
    pub fn births(&self, kind: AgentKind) -> u64 {
        self.births[kind.slot()]
    }

    pub fn deaths(&self, kind: AgentKind) -> u64 {
        match kind {
            AgentKind::Prey => self.starvation[0] + self.predation,
            AgentKind::Predator => self.starvation[1],
        }
    }

    fn absorb(&mut self, other: StepEvents) {
        for i in 0..2 {
            self.births[i] += other.births[i];
            self.starvation[i] += other.starvation[i];
        }
        self.predation += other.predation;
    }
}

/// The six output series, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Column {
    TotalPrey,
    TotalPredators,
    TotalFood,
    MeanEnergyPrey,
    MeanEnergyPredators,
    MeanC,
}

impl Column {
    pub const ALL: [Column; 6] = [
        Column::TotalPrey,
        Column::TotalPredators,
        Column::TotalFood,
        Column::MeanEnergyPrey,
        Column::MeanEnergyPredators,
        Column::MeanC,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::TotalPrey => "total_prey",
            Column::TotalPredators => "total_predators",
            Column::TotalFood => "total_food",
            Column::MeanEnergyPrey => "mean_energy_prey",
            Column::MeanEnergyPredators => "mean_energy_predators",
            Column::MeanC => "mean_c",
        }
    }
}

/// Model outputs at one iteration. Means over an empty population are 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputRow {
    pub total_prey: u64,
    pub total_predators: u64,
    pub total_food: u64,
    pub mean_energy_prey: f64,
    pub mean_energy_predators: f64,
    pub mean_c: f64,
}

impl OutputRow {
    pub fn value(&self, column: Column) -> f64 {
        match column {
            Column::TotalPrey => self.total_prey as f64,
            Column::TotalPredators => self.total_predators as f64,
            Column::TotalFood => self.total_food as f64,
            Column::MeanEnergyPrey => self.mean_energy_prey,
            Column::MeanEnergyPredators => self.mean_energy_predators,
            Column::MeanC => self.mean_c,
        }
    }
}

/// One row per iteration; row 0 is the state right after initialization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimOutput {
    pub rows: Vec<OutputRow>,
}

impl SimOutput {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, column: Column) -> Vec<f64> {
        self.rows.iter().map(|r| r.value(column)).collect()
    }
}

pub struct World {
    params: SimParams,
    rules: Ruleset,
    /// Food countdown per cell, row-major (`y * grid_x + x`). Food is
    /// available iff the countdown is 0.
    countdowns: Vec<u32>,
    agents: Vec<Agent>,
    rng: SimRng,
    iteration: u64,
    // Scratch buffers reused by the act phase.
    prey_on_cell: Vec<Vec<u32>>,
    order: Vec<u32>,
}

impl World {
    pub fn new(params: SimParams, seed: u64) -> Result<Self, ParamError> {
        Self::with_rules(params, seed, Ruleset::default())
    }

    pub fn with_rules(params: SimParams, seed: u64, rules: Ruleset) -> Result<Self, ParamError> {
        params.validate()?;
        let mut rng = rng_from_seed(seed);
        let total = params.init_prey as usize + params.init_predators as usize;
        let mut agents = Vec::with_capacity(total);
        let populations = [
            (AgentKind::Prey, params.init_prey, params.prey_gain),
            (
                AgentKind::Predator,
                params.init_predators,
                params.predator_gain,
            ),
        ];
        for (kind, count, gain) in populations {
            // A zero gain would leave {1..=0}; such agents start with energy 1.
            let max_energy = (2 * i64::from(gain)).max(1);
            for _ in 0..count {
                let x = rng.gen_range(0..params.grid_x);
                let y = rng.gen_range(0..params.grid_y);
                let energy = rng.gen_range(1..=max_energy);
                agents.push(Agent { kind, energy, x, y });
            }
        }
        let countdowns = (0..params.cell_count())
            .map(|_| rng.gen_range(0..=params.cell_food_restart))
            .collect();
        Ok(World {
            params,
            rules,
            countdowns,
            agents,
            rng,
            iteration: 0,
            prey_on_cell: Vec::new(),
            order: Vec::new(),
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    /// Cell countdowns in row-major order.
    pub fn countdowns(&self) -> &[u32] {
        &self.countdowns
    }

    pub fn countdown(&self, x: u32, y: u32) -> u32 {
        self.countdowns[self.cell_index(x, y)]
    }

    /// Overwrites a cell countdown, clamped to `cell_food_restart`.
    pub fn set_countdown(&mut self, x: u32, y: u32, value: u32) {
        let idx = self.cell_index(x, y);
        self.countdowns[idx] = value.min(self.params.cell_food_restart);
    }

    pub fn clear_agents(&mut self) {
        self.agents.clear();
    }

    /// Adds an agent at the end of the collection.
    ///
    /// # Panics
    /// If the cell is off-grid or the energy is not positive.
    pub fn place_agent(&mut self, agent: Agent) {
        assert!(agent.x < self.params.grid_x && agent.y < self.params.grid_y);
        assert!(agent.energy >= 1, "agents must start with positive energy");
        self.agents.push(agent);
    }

    fn cell_index(&self, x: u32, y: u32) -> usize {
        y as usize * self.params.grid_x as usize + x as usize
    }

    /// Moves every agent to a uniformly chosen orthogonal neighbour and
    /// charges the movement cost. Starved agents are removed afterwards.
    pub fn move_phase(&mut self) -> StepEvents {
        let (gx, gy) = (self.params.grid_x, self.params.grid_y);
        let losses = [
            i64::from(self.params.prey_loss),
            i64::from(self.params.predator_loss),
        ];
        // Offsets modulo the grid size: left, right, down, up.
        let steps = [(gx - 1, 0), (1, 0), (0, gy - 1), (0, 1)];
        for agent in &mut self.agents {
            let (dx, dy) = steps[self.rng.gen_range(0..4u32) as usize];
            let nx = agent.x + dx;
            let ny = agent.y + dy;
            agent.x = if nx >= gx { nx - gx } else { nx };
            agent.y = if ny >= gy { ny - gy } else { ny };
            agent.energy -= losses[agent.kind.slot()];
        }
        let mut events = StepEvents::default();
        self.agents.retain(|a| {
            if a.energy > 0 {
                true
            } else {
                events.starvation[a.kind.slot()] += 1;
                false
            }
        });
        events
    }

    /// Decrements every positive countdown by one.
    pub fn grow_food_phase(&mut self) {
        for c in &mut self.countdowns {
            *c = c.saturating_sub(1);
        }
    }

    /// Visits the agents alive at phase start in random order; each one
    /// feeds, then tries to reproduce. Effects are visible immediately to
    /// agents visited later. Newborns are not visited this phase but can be
    /// eaten by predators visited later.
    pub fn act_phase(&mut self) -> StepEvents {
        let p = self.params;
        let gx = p.grid_x as usize;
        let mut events = StepEvents::default();

        if self.prey_on_cell.len() != self.countdowns.len() {
            self.prey_on_cell = vec![Vec::new(); self.countdowns.len()];
        }
        for list in &mut self.prey_on_cell {
            list.clear();
        }
        for (i, a) in self.agents.iter().enumerate() {
            if a.kind == AgentKind::Prey {
                self.prey_on_cell[a.y as usize * gx + a.x as usize].push(i as u32);
            }
        }

        self.order.clear();
        self.order.extend(0..self.agents.len() as u32);
        self.order.shuffle(&mut self.rng);

        for k in 0..self.order.len() {
            let idx = self.order[k] as usize;
            let agent = self.agents[idx];
            if agent.energy <= 0 {
                // Eaten earlier in this phase.
                continue;
            }
            let cell = agent.y as usize * gx + agent.x as usize;
            let mut energy = agent.energy;
            let (threshold, prob) = match agent.kind {
                AgentKind::Prey => {
                    if self.countdowns[cell] == 0 {
                        energy += i64::from(p.prey_gain);
                        self.countdowns[cell] = p.cell_food_restart;
                    }
                    (p.prey_repro_threshold, p.prey_repro_prob)
                }
                AgentKind::Predator => {
                    let victims = &mut self.prey_on_cell[cell];
                    if self.rules.predation && !victims.is_empty() {
                        let pick = self.rng.gen_range(0..victims.len());
                        let victim = victims.swap_remove(pick) as usize;
                        self.agents[victim].energy = 0;
                        events.predation += 1;
                        energy += i64::from(p.predator_gain);
                    }
                    (p.predator_repro_threshold, p.predator_repro_prob)
                }
            };
            if energy > i64::from(threshold) && self.rng.gen_range(0..100u32) < prob {
                let child_energy = energy / 2;
                energy -= child_energy;
                let child_idx = self.agents.len() as u32;
                self.agents.push(Agent {
                    energy: child_energy,
                    ..agent
                });
                if agent.kind == AgentKind::Prey {
                    self.prey_on_cell[cell].push(child_idx);
                }
                events.births[agent.kind.slot()] += 1;
            }
            self.agents[idx].energy = energy;
        }

        if events.predation > 0 {
            self.agents.retain(|a| a.energy > 0);
        }
        events
    }

    /// Runs one full iteration (move, grow food, act).
    pub fn step(&mut self) -> StepEvents {
        let mut events = self.move_phase();
        self.grow_food_phase();
        events.absorb(self.act_phase());
        self.iteration += 1;
        events
    }

    pub fn collect_outputs(&self) -> OutputRow {
        let mut counts = [0u64; 2];
        let mut energy = [0i64; 2];
        for a in &self.agents {
            counts[a.kind.slot()] += 1;
            energy[a.kind.slot()] += a.energy;
        }
        let mean = |slot: usize| {
            if counts[slot] == 0 {
                0.0
            } else {
                energy[slot] as f64 / counts[slot] as f64
            }
        };
        let mut food = 0u64;
        let mut c_sum = 0u64;
        for &c in &self.countdowns {
            food += u64::from(c == 0);
            c_sum += u64::from(c);
        }
        OutputRow {
            total_prey: counts[0],
            total_predators: counts[1],
            total_food: food,
            mean_energy_prey: mean(0),
            mean_energy_predators: mean(1),
            mean_c: c_sum as f64 / self.countdowns.len() as f64,
        }
    }
}

/// Runs the model and returns `iterations + 1` output rows.
pub fn run_simulation(params: &SimParams, seed: u64) -> Result<SimOutput, ParamError> {
    run_simulation_with(params, seed, Ruleset::default())
}

pub fn run_simulation_with(
    params: &SimParams,
    seed: u64,
    rules: Ruleset,
) -> Result<SimOutput, ParamError> {
    let mut world = World::with_rules(*params, seed, rules)?;
    let mut rows = Vec::with_capacity(params.iterations as usize + 1);
    rows.push(world.collect_outputs());
    for _ in 0..params.iterations {
        world.step();
        rows.push(world.collect_outputs());
    }
    Ok(SimOutput { rows })
}
