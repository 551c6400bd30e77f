//! Frozen agents wrapped as [`Driver`]s for evaluation and trajectory export.

use super::DqnAgent;
use crate::env::{ControlInput, Driver, EnvState};
use crate::macro_action::MacroAction;
use crate::observation::Observer;
use crate::skills::SkillLibrary;
use crate::SimRng;

/// Greedy macro-action selection each frame.
#[derive(Debug, Clone)]
pub struct GreedyLowLevel<'a> {
    agent: &'a DqnAgent,
    observer: Observer,
    last: Option<usize>,
}

impl<'a> GreedyLowLevel<'a> {
    pub fn new(agent: &'a DqnAgent, observer: Observer) -> Self {
        Self { agent, observer, last: None }
    }
}

impl Driver for GreedyLowLevel<'_> {
    fn begin_episode(&mut self) {
        self.last = None;
    }

    fn control(&mut self, state: &EnvState, rng: &mut SimRng) -> ControlInput {
        let a = self.agent.greedy(&self.observer.encode(state));
        self.last = Some(a);
        MacroAction::ALL[a].realize(rng)
    }

    fn choice(&self) -> Option<usize> {
        self.last
    }
}

/// Greedy skill selection every `n_step` frames.
#[derive(Debug, Clone)]
pub struct GreedyHighLevel<'a> {
    agent: &'a DqnAgent,
    skills: &'a SkillLibrary,
    observer: Observer,
    n_step: usize,
    deterministic: bool,
    frame: usize,
    z: usize,
}

impl<'a> GreedyHighLevel<'a> {
    pub fn new(agent: &'a DqnAgent, skills: &'a SkillLibrary, observer: Observer, n_step: usize, deterministic: bool) -> Self {
        assert!(n_step >= 1);
        Self { agent, skills, observer, n_step, deterministic, frame: 0, z: 0 }
    }
}

impl Driver for GreedyHighLevel<'_> {
    fn begin_episode(&mut self) {
        self.frame = 0;
    }

    fn control(&mut self, state: &EnvState, rng: &mut SimRng) -> ControlInput {
        let s = self.observer.encode(state);
        if self.frame % self.n_step == 0 {
            self.z = self.agent.greedy(&s);
        }
        self.frame += 1;
        self.skills.act(&s, self.z, rng, self.deterministic)
    }

    fn choice(&self) -> Option<usize> {
        (self.frame > 0).then_some(self.z)
    }
}

/// Emits the same macro-action every frame.
#[derive(Debug, Clone, Copy)]
pub struct FixedMacroDriver(pub MacroAction);

impl Driver for FixedMacroDriver {
    fn control(&mut self, _state: &EnvState, rng: &mut SimRng) -> ControlInput {
        self.0.realize(rng)
    }

    fn choice(&self) -> Option<usize> {
        Some(self.0.index())
    }
}

/// Runs one skill for the whole episode.
#[derive(Debug, Clone)]
pub struct SkillDriver<'a> {
    pub skills: &'a SkillLibrary,
    pub z: usize,
    pub observer: Observer,
    pub deterministic: bool,
}

impl Driver for SkillDriver<'_> {
    fn control(&mut self, state: &EnvState, rng: &mut SimRng) -> ControlInput {
        self.skills.act(&self.observer.encode(state), self.z, rng, self.deterministic)
    }

    fn choice(&self) -> Option<usize> {
        Some(self.z)
    }
}
