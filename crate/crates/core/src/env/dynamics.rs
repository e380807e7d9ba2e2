//! One simulation tick.
//!
//! Order of resolution:
//! 1. validate actions against the masks handed out last tick
//! 2. advance the clock, tick cooldowns, spawn a creep wave every
//!    `WAVE_PERIOD` ticks
//! 3. hero intents, resolved against the pre-move state (attacks out of
//!    range turn into a step toward the target)
//! 4. hero moves
//! 5. creeps, turrets and monsters choose targets and move
//! 6. all damage lands simultaneously; deaths award gold, experience and kills
//! 7. regeneration, respawns, rewards, masks, observations

use super::action::{self, Button, HeadKind, StructuredAction};
use super::constants::*;
use super::reward::{hero_items, weighted_reward, zero_sum_rewards, HeroTick, RewardVector};
use super::state::{GameState, Pos, Team, Unit, UnitKind, UnitRef, UnitState};
use super::{mix64, snapshot, EnvError, Environment, MapLayout, StepResult};

struct Hit {
    target: UnitRef,
    amount: u32,
    hero: Option<usize>,
}

struct Tick {
    hits: Vec<Hit>,
    moves: Vec<Option<Pos>>,
    heroes: Vec<HeroTick>,
}

impl Environment {
    /// Advance one tick with one action per hero.
    pub fn step(&mut self, actions: &[StructuredAction]) -> Result<StepResult, EnvError> {
        let state = self.state.as_ref().ok_or(EnvError::NotReset)?;
        if state.done {
            return Err(EnvError::EpisodeDone);
        }
        let n = state.heroes.len();
        if actions.len() != n {
            return Err(EnvError::ActionCount { expected: n, got: actions.len() });
        }
        for (hero, (a, m)) in actions.iter().zip(&self.masks).enumerate() {
            if let Some((head, index)) = m.first_violation(a) {
                let head_name = self.spec.head_names.get(head).cloned().unwrap_or_else(|| "<missing>".into());
                return Err(EnvError::IllegalAction { hero, head, head_name, index });
            }
        }

        let mut st = self.state.take().expect("checked above");
        let mut tick = Tick { hits: Vec::new(), moves: vec![None; n], heroes: vec![HeroTick::default(); n] };
        st.step += 1;
        for h in st.heroes.iter_mut() {
            h.skill_cooldown = h.skill_cooldown.saturating_sub(1);
            h.heal_cooldown = h.heal_cooldown.saturating_sub(1);
        }
        if (st.step - 1).is_multiple_of(WAVE_PERIOD) {
            spawn_wave(&mut st, &self.layout);
        }

        for (h, a) in actions.iter().enumerate() {
            self.hero_intent(&mut st, h, a, &mut tick);
        }
        for (h, m) in tick.moves.iter().enumerate() {
            if let Some(p) = m {
                st.heroes[h].base.pos = self.layout.clamp(*p);
            }
        }
        self.creeps_act(&mut st, &mut tick);
        self.turrets_act(&mut st, &mut tick);
        self.monsters_act(&mut st, &mut tick);
        let outcome = apply_hits(&mut st, &mut tick);
        finish_tick(&mut st, &mut tick);

        if let Some(o) = outcome {
            st.done = true;
            st.winner = o;
        }
        if st.step >= self.config.max_steps {
            st.done = true;
        }

        let rewards = self.rewards(&st, &tick);
        self.snapshots = (0..n).map(|i| snapshot(&st, i)).collect();
        self.state = Some(st);
        self.refresh_masks();
        Ok(self.result(rewards))
    }

    fn crit(&self, unit_id: u32, counter: &mut u64) -> bool {
        let c = *counter;
        *counter += 1;
        if self.config.crit_chance <= 0.0 {
            return false;
        }
        let z = mix64(self.episode_key ^ mix64(((unit_id as u64) << 40) ^ c));
        ((z >> 11) as f64 / (1u64 << 53) as f64) < self.config.crit_chance
    }

    fn rolled(&self, base: u32, unit_id: u32, counter: &mut u64) -> u32 {
        if self.crit(unit_id, counter) {
            base * CRIT_MULTIPLIER
        } else {
            base
        }
    }

    fn hero_intent(&self, st: &mut GameState, h: usize, a: &StructuredAction, tick: &mut Tick) {
        let button = a.button();
        st.heroes[h].last_button = button as usize;
        if !st.heroes[h].alive() {
            return;
        }
        let spec = &self.spec;
        let dir = st.heroes[h].team().dir();
        let pos = st.heroes[h].pos();
        let target = || {
            spec.head_index(HeadKind::Target)
                .and_then(|th| self.slot_refs[h].get(a.head_indices[th]).copied().flatten())
        };
        match button {
            Button::NoOp => {}
            Button::Move => {
                let (dx, dy) = match spec.head_index(HeadKind::Move) {
                    Some(mh) => action::joint_offset(a.head_indices[mh]),
                    None => (
                        action::axis_offset(a.head_indices[spec.head_index(HeadKind::MoveX).expect("move_x head")]),
                        action::axis_offset(a.head_indices[spec.head_index(HeadKind::MoveY).expect("move_y head")]),
                    ),
                };
                tick.moves[h] = Some(Pos::new(pos.x + dx * dir, pos.y + dy));
            }
            Button::Attack => {
                let Some(t) = target() else { return };
                let tpos = st.unit(t).pos;
                let hero = &mut st.heroes[h];
                if pos.dist(tpos) <= hero.attack_range {
                    let base = hero.base.attack;
                    let id = hero.base.unit_id;
                    let mut counter = hero.attacks_rolled;
                    let amount = self.rolled(base, id, &mut counter);
                    st.heroes[h].attacks_rolled = counter;
                    tick.hits.push(Hit { target: t, amount, hero: Some(h) });
                } else {
                    tick.moves[h] = Some(pos.step_toward(tpos));
                }
            }
            Button::Skill => {
                let Some(t) = target() else { return };
                let off = |kind| spec.head_index(kind).map(|i| action::axis_offset(a.head_indices[i])).unwrap_or(0);
                let tpos = st.unit(t).pos;
                let center = Pos::new(tpos.x + off(HeadKind::SkillX) * dir, tpos.y + off(HeadKind::SkillY));
                let hero = &mut st.heroes[h];
                hero.mana -= SKILL_MANA_COST;
                hero.skill_cooldown = SKILL_COOLDOWN;
                let team = hero.team();
                let dmg = hero.skill_damage;
                for r in st.all_refs().collect::<Vec<_>>() {
                    let u = st.unit(r);
                    if u.alive && team.hostile_to(u.team) && u.pos.dist(center) <= SKILL_BLAST_RADIUS {
                        tick.hits.push(Hit { target: r, amount: dmg, hero: Some(h) });
                    }
                }
            }
            Button::Heal => {
                let hero = &mut st.heroes[h];
                hero.base.hp = (hero.base.hp + HEAL_AMOUNT).min(hero.base.max_hp);
                hero.heal_cooldown = HEAL_COOLDOWN;
            }
        }
    }

    fn creeps_act(&self, st: &mut GameState, tick: &mut Tick) {
        for i in 0..st.units.len() {
            let u = &st.units[i].state;
            if u.kind != UnitKind::Creep || !u.alive {
                continue;
            }
            let (team, pos) = (u.team, u.pos);
            let pick = nearest_hostile(st, pos, team, CREEP_AGGRO, false);
            match pick {
                Some((r, d)) if d <= CREEP_RANGE => {
                    let unit = &mut st.units[i];
                    let mut counter = unit.attacks_rolled;
                    let amount = self.rolled(CREEP_ATTACK, unit.state.unit_id, &mut counter);
                    st.units[i].attacks_rolled = counter;
                    tick.hits.push(Hit { target: r, amount, hero: None });
                }
                Some((r, _)) => {
                    let to = st.unit(r).pos;
                    st.units[i].state.pos = pos.step_toward(to);
                }
                None => {
                    let goal = self.layout.crystal_pos(team.enemy());
                    let next = pos.step_toward(goal);
                    // never walk onto the enemy structures' cells
                    if next != st.turret(team.enemy()).pos && next != goal {
                        st.units[i].state.pos = next;
                    }
                }
            }
        }
    }

    fn turrets_act(&self, st: &mut GameState, tick: &mut Tick) {
        for team in [Team::A, Team::B] {
            let slot = state_turret_slot(team);
            let turret = &st.units[slot].state;
            if !turret.alive {
                continue;
            }
            let tpos = turret.pos;
            let enemy = team.enemy();
            let in_range = |p: Pos| p.dist(tpos) <= TURRET_RANGE;
            // An enemy hero that hit one of our heroes this tick draws aggro.
            let aggressor = tick
                .hits
                .iter()
                .filter_map(|hit| {
                    let attacker = hit.hero?;
                    let victim_is_ally = matches!(hit.target, UnitRef::Hero(v) if st.heroes[v].team() == team);
                    let ah = &st.heroes[attacker];
                    (victim_is_ally && ah.team() == enemy && ah.alive() && in_range(ah.pos())).then_some(attacker)
                })
                .min();
            let target = aggressor.map(UnitRef::Hero).or_else(|| {
                let creep = st
                    .units
                    .iter()
                    .enumerate()
                    .filter(|(_, u)| u.state.alive && u.state.kind == UnitKind::Creep && u.state.team == enemy)
                    .filter(|(_, u)| in_range(u.state.pos))
                    .min_by_key(|(_, u)| (u.state.pos.dist(tpos), u.state.unit_id))
                    .map(|(i, _)| UnitRef::Unit(i));
                creep.or_else(|| {
                    st.heroes
                        .iter()
                        .enumerate()
                        .filter(|(_, h)| h.alive() && h.team() == enemy && in_range(h.pos()))
                        .min_by_key(|(i, h)| (h.pos().dist(tpos), *i))
                        .map(|(i, _)| UnitRef::Hero(i))
                })
            });
            if let Some(r) = target {
                let unit = &st.units[slot];
                let mut counter = unit.attacks_rolled;
                let amount = self.rolled(TURRET_ATTACK, unit.state.unit_id, &mut counter);
                st.units[slot].attacks_rolled = counter;
                tick.hits.push(Hit { target: r, amount, hero: None });
            }
        }
    }

    fn monsters_act(&self, st: &mut GameState, tick: &mut Tick) {
        for i in 0..st.units.len() {
            let u = &st.units[i].state;
            if u.kind != UnitKind::Monster || !u.alive {
                continue;
            }
            let pos = u.pos;
            let victim = st
                .heroes
                .iter()
                .enumerate()
                .filter(|(_, h)| h.alive() && h.pos().dist(pos) <= MONSTER_RANGE)
                .min_by_key(|(j, h)| (h.pos().dist(pos), *j))
                .map(|(j, _)| j);
            if let Some(v) = victim {
                let unit = &st.units[i];
                let mut counter = unit.attacks_rolled;
                let amount = self.rolled(MONSTER_ATTACK, unit.state.unit_id, &mut counter);
                st.units[i].attacks_rolled = counter;
                tick.hits.push(Hit { target: UnitRef::Hero(v), amount, hero: None });
            }
        }
    }

    fn rewards(&self, st: &GameState, tick: &Tick) -> Vec<RewardVector> {
        let mode = self.config.mode;
        let n = st.heroes.len();
        let teams: Vec<Team> = st.heroes.iter().map(|h| h.team()).collect();
        let mut vectors: Vec<RewardVector> = (0..n)
            .map(|i| {
                let team = teams[i];
                let outcome = match (st.done, st.winner) {
                    (true, Some(w)) if w == team => 1,
                    (true, Some(_)) => -1,
                    _ => 0,
                };
                let now = snapshot(st, i);
                let items = hero_items(mode, &self.snapshots[i], &now, &tick.heroes[i], outcome);
                let weighted = weighted_reward(mode, &items, &self.config.reward_weights);
                RewardVector { items, weighted, zero_sum: 0.0 }
            })
            .collect();
        let weighted: Vec<f64> = vectors.iter().map(|v| v.weighted).collect();
        for (v, z) in vectors.iter_mut().zip(zero_sum_rewards(&weighted, &teams)) {
            v.zero_sum = z;
        }
        vectors
    }
}

fn state_turret_slot(team: Team) -> usize {
    super::state::TURRET_SLOT[team.index()]
}

/// Nearest unit hostile to `team` within `radius`, excluding monsters
/// (lane units ignore the jungle). Invulnerable structures are skipped.
fn nearest_hostile(st: &GameState, pos: Pos, team: Team, radius: u32, monsters: bool) -> Option<(UnitRef, u32)> {
    let mut best: Option<(u32, u32, UnitRef)> = None;
    for r in st.all_refs() {
        let u = st.unit(r);
        if !u.alive || !team.hostile_to(u.team) || (u.kind == UnitKind::Monster && !monsters) {
            continue;
        }
        if st.invulnerable(u) {
            continue;
        }
        let d = u.pos.dist(pos);
        if d > radius {
            continue;
        }
        let key = (d, u.unit_id, r);
        if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
            best = Some(key);
        }
    }
    best.map(|(d, _, r)| (r, d))
}

fn spawn_wave(st: &mut GameState, lay: &MapLayout) {
    for team in [Team::A, Team::B] {
        let alive = st.units.iter().filter(|u| u.state.kind == UnitKind::Creep && u.state.team == team).count();
        let n = CREEPS_PER_WAVE.min(MAX_CREEPS_PER_TEAM.saturating_sub(alive));
        for _ in 0..n {
            let pos = lay.creep_spawn(team);
            let id = st.next_unit_id;
            st.next_unit_id += 1;
            st.units.push(Unit {
                state: UnitState {
                    unit_id: id,
                    kind: UnitKind::Creep,
                    team,
                    pos,
                    hp: CREEP_HP,
                    max_hp: CREEP_HP,
                    attack: CREEP_ATTACK,
                    alive: true,
                },
                respawn_timer: 0,
                home: pos,
                attacks_rolled: 0,
            });
        }
    }
}

/// Land all hits. Returns `Some(winner)` when a crystal fell this tick
/// (`Some(None)` when both did).
fn apply_hits(st: &mut GameState, tick: &mut Tick) -> Option<Option<Team>> {
    let n_heroes = st.heroes.len();
    // damage[target] and per-hero contributions for last-hit attribution
    let mut total: std::collections::BTreeMap<UnitRef, (u32, Vec<u32>)> = Default::default();
    for hit in &tick.hits {
        let u = st.unit(hit.target);
        if !u.alive {
            continue;
        }
        if st.invulnerable(u) {
            continue;
        }
        let e = total.entry(hit.target).or_insert_with(|| (0, vec![0; n_heroes]));
        e.0 += hit.amount;
        if let Some(h) = hit.hero {
            e.1[h] += hit.amount;
            let ht = &mut tick.heroes[h];
            match (u.kind, hit.target) {
                (UnitKind::Hero, _) => ht.hero_damage += hit.amount,
                (UnitKind::Monster, _) => ht.monster_damage += hit.amount,
                (UnitKind::Crystal, _) => ht.crystal_damage += hit.amount,
                _ => {}
            }
        }
    }

    let mut fallen = [false; 2];
    for (r, (dmg, by_hero)) in total {
        let u = st.unit_mut(r);
        u.hp = u.hp.saturating_sub(dmg);
        if u.hp > 0 {
            continue;
        }
        u.alive = false;
        let (kind, team, pos) = (u.kind, u.team, u.pos);
        // last hit: the hero that dealt the most damage this tick, lowest index on ties
        let killer = by_hero
            .iter()
            .enumerate()
            .filter(|(h, &d)| d > 0 && st.heroes[*h].team().hostile_to(team))
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(h, _)| h);
        match kind {
            UnitKind::Hero => {
                let UnitRef::Hero(v) = r else { unreachable!() };
                let victim = &mut st.heroes[v];
                victim.respawn_timer = RESPAWN_DELAY;
                victim.deaths += 1;
                tick.heroes[v].died = true;
                st.team_kills[team.enemy().index()] += 1;
                if let Some(k) = killer {
                    let hk = &mut st.heroes[k];
                    hk.gold += GOLD_HERO;
                    hk.experience += EXP_HERO;
                    hk.kills += 1;
                    tick.heroes[k].kills += 1;
                    let kteam = hk.team();
                    for a in 0..n_heroes {
                        let ha = &st.heroes[a];
                        if a != k && ha.team() == kteam && ha.alive() && ha.pos().dist(pos) <= ASSIST_RADIUS {
                            tick.heroes[a].assists += 1;
                        }
                    }
                }
            }
            UnitKind::Creep | UnitKind::Turret | UnitKind::Monster => {
                if let Some(k) = killer {
                    let (gold, exp) = match kind {
                        UnitKind::Creep => (GOLD_CREEP, EXP_CREEP),
                        UnitKind::Turret => (GOLD_TURRET, 0),
                        _ => (GOLD_MONSTER, EXP_MONSTER),
                    };
                    st.heroes[k].gold += gold;
                    st.heroes[k].experience += exp;
                    tick.heroes[k].last_hits += 1;
                }
                if kind == UnitKind::Monster {
                    if let UnitRef::Unit(i) = r {
                        st.units[i].respawn_timer = MONSTER_RESPAWN_DELAY;
                    }
                }
            }
            UnitKind::Crystal => fallen[team.index()] = true,
        }
    }
    match fallen {
        [true, true] => Some(None),
        [true, false] => Some(Some(Team::B)),
        [false, true] => Some(Some(Team::A)),
        _ => None,
    }
}

/// Level-ups, regeneration, respawns and removal of dead creeps.
fn finish_tick(st: &mut GameState, tick: &mut Tick) {
    for hero in st.heroes.iter_mut() {
        let level = (1 + hero.experience / EXP_PER_LEVEL).min(MAX_HERO_LEVEL);
        if level > hero.level {
            let gained = level - hero.level;
            hero.level = level;
            hero.base.attack += ATTACK_PER_LEVEL * gained;
            hero.base.max_hp += HP_PER_LEVEL * gained;
            if hero.alive() {
                hero.base.hp += HP_PER_LEVEL * gained;
            }
        }
    }
    for team in [Team::A, Team::B] {
        let fountain = st.crystal(team).pos;
        for h in 0..st.heroes.len() {
            let hero = &mut st.heroes[h];
            if hero.team() != team {
                continue;
            }
            if hero.alive() {
                hero.mana = (hero.mana + MANA_REGEN).min(MAX_MANA);
                hero.experience += EXP_AMBIENT;
                if hero.pos().dist(fountain) <= FOUNTAIN_RADIUS {
                    hero.base.hp = (hero.base.hp + FOUNTAIN_REGEN).min(hero.base.max_hp);
                }
            } else if tick.heroes[h].died {
                // the timer starts counting next tick
            } else {
                hero.respawn_timer = hero.respawn_timer.saturating_sub(1);
                if hero.respawn_timer == 0 {
                    hero.base.alive = true;
                    hero.base.hp = hero.base.max_hp;
                    hero.base.pos = hero.spawn;
                    hero.mana = MAX_MANA;
                    tick.heroes[h].respawned = true;
                }
            }
        }
    }
    for u in st.units.iter_mut() {
        if u.state.kind == UnitKind::Monster && !u.state.alive {
            u.respawn_timer = u.respawn_timer.saturating_sub(1);
            if u.respawn_timer == 0 {
                u.state.alive = true;
                u.state.hp = u.state.max_hp;
                u.state.pos = u.home;
            }
        }
    }
    st.units.retain(|u| u.state.kind != UnitKind::Creep || u.state.alive);
}
