use serde::{Deserialize, Serialize};

use super::config::Archetype;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Team {
    A,
    B,
    Neutral,
}

impl Team {
    /// Forward x direction of a team: toward the enemy crystal.
    pub fn dir(self) -> i32 {
        match self {
            Team::A => 1,
            Team::B => -1,
            Team::Neutral => 0,
        }
    }

    pub fn enemy(self) -> Team {
        match self {
            Team::A => Team::B,
            Team::B => Team::A,
            Team::Neutral => Team::Neutral,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Team::A => 0,
            Team::B => 1,
            Team::Neutral => 2,
        }
    }

    /// Whether units of `self` and `other` may damage each other. Neutral
    /// monsters are hostile to both teams.
    pub fn hostile_to(self, other: Team) -> bool {
        self != other
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnitKind {
    Hero,
    Creep,
    Turret,
    Crystal,
    Monster,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub fn new(x: i32, y: i32) -> Self {
        Pos { x, y }
    }

    /// Chebyshev distance.
    pub fn dist(self, other: Pos) -> u32 {
        (self.x - other.x).unsigned_abs().max((self.y - other.y).unsigned_abs())
    }

    /// One step toward `other` along each axis.
    pub fn step_toward(self, other: Pos) -> Pos {
        Pos::new(self.x + (other.x - self.x).signum(), self.y + (other.y - self.y).signum())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitState {
    pub unit_id: u32,
    pub kind: UnitKind,
    pub team: Team,
    pub pos: Pos,
    pub hp: u32,
    pub max_hp: u32,
    pub attack: u32,
    pub alive: bool,
}

impl UnitState {
    pub fn hp_rate(&self) -> f64 {
        if self.max_hp == 0 {
            0.0
        } else {
            self.hp as f64 / self.max_hp as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeroState {
    pub base: UnitState,
    pub mana: u32,
    pub gold: u32,
    pub experience: u32,
    pub skill_cooldown: u32,
    pub heal_cooldown: u32,
    pub archetype: Archetype,
    pub vision_radius: u32,
    pub attack_range: u32,
    pub skill_damage: u32,
    /// Ticks until respawn; 0 while alive.
    pub respawn_timer: u32,
    pub spawn: Pos,
    pub last_button: usize,
    pub level: u32,
    pub kills: u32,
    pub deaths: u32,
    pub(crate) attacks_rolled: u64,
}

impl HeroState {
    pub fn team(&self) -> Team {
        self.base.team
    }

    pub fn alive(&self) -> bool {
        self.base.alive
    }

    pub fn pos(&self) -> Pos {
        self.base.pos
    }

    /// Whether this hero can see `pos`. Dead heroes see nothing.
    pub fn sees(&self, pos: Pos) -> bool {
        self.base.alive && self.base.pos.dist(pos) <= self.vision_radius
    }
}

/// A non-hero unit plus its bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub state: UnitState,
    /// Ticks until a dead monster respawns.
    pub respawn_timer: u32,
    pub home: Pos,
    pub(crate) attacks_rolled: u64,
}

/// Reference to any unit of the game state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnitRef {
    Hero(usize),
    Unit(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub step: u32,
    pub heroes: Vec<HeroState>,
    /// Structures first (A turret, A crystal, B turret, B crystal), then
    /// monsters, then creeps in spawn order.
    pub units: Vec<Unit>,
    pub team_kills: [u32; 2],
    pub winner: Option<Team>,
    pub done: bool,
    /// Turrets and crystals never take damage, so the lane never collapses
    /// and Gain Gold episodes always run to the step limit.
    pub structures_shielded: bool,
    pub(crate) next_unit_id: u32,
}

pub const TURRET_SLOT: [usize; 2] = [0, 2];
pub const CRYSTAL_SLOT: [usize; 2] = [1, 3];

impl GameState {
    pub fn unit(&self, r: UnitRef) -> &UnitState {
        match r {
            UnitRef::Hero(i) => &self.heroes[i].base,
            UnitRef::Unit(i) => &self.units[i].state,
        }
    }

    pub fn unit_mut(&mut self, r: UnitRef) -> &mut UnitState {
        match r {
            UnitRef::Hero(i) => &mut self.heroes[i].base,
            UnitRef::Unit(i) => &mut self.units[i].state,
        }
    }

    pub fn turret(&self, team: Team) -> &UnitState {
        &self.units[TURRET_SLOT[team.index()]].state
    }

    pub fn crystal(&self, team: Team) -> &UnitState {
        &self.units[CRYSTAL_SLOT[team.index()]].state
    }

    /// Crystals can only be damaged once their turret has fallen.
    pub fn crystal_vulnerable(&self, team: Team) -> bool {
        !self.structures_shielded && !self.turret(team).alive
    }

    /// Units that currently ignore all damage and cannot be targeted.
    pub fn invulnerable(&self, u: &UnitState) -> bool {
        match u.kind {
            UnitKind::Crystal => !self.crystal_vulnerable(u.team),
            UnitKind::Turret => self.structures_shielded,
            _ => false,
        }
    }

    /// The enemy structure currently worth attacking: the turret while it
    /// stands, the crystal afterwards.
    pub fn frontline_structure(&self, team: Team) -> UnitRef {
        let t = team.index();
        if self.units[TURRET_SLOT[t]].state.alive {
            UnitRef::Unit(TURRET_SLOT[t])
        } else {
            UnitRef::Unit(CRYSTAL_SLOT[t])
        }
    }

    pub fn team_heroes(&self, team: Team) -> impl Iterator<Item = usize> + '_ {
        self.heroes.iter().enumerate().filter(move |(_, h)| h.team() == team).map(|(i, _)| i)
    }

    pub fn all_refs(&self) -> impl Iterator<Item = UnitRef> + '_ {
        (0..self.heroes.len()).map(UnitRef::Hero).chain((0..self.units.len()).map(UnitRef::Unit))
    }

    /// Structure hp rate of a team, turret and crystal pooled.
    pub fn structure_rate(&self, team: Team) -> f64 {
        let t = self.turret(team);
        let c = self.crystal(team);
        (t.hp + c.hp) as f64 / (t.max_hp + c.max_hp) as f64
    }
}
