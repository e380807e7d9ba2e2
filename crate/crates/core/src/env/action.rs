//! Structured (multi-head) actions and their masks.
//!
//! Directional heads are expressed in the acting hero's own frame: `+x` always
//! points toward the enemy crystal. The environment mirrors them for team B.

use serde::{Deserialize, Serialize};

/// Button head entries, shared by every mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Button {
    NoOp = 0,
    Move = 1,
    Attack = 2,
    Skill = 3,
    Heal = 4,
}

impl Button {
    pub const COUNT: usize = 5;
    pub const ALL: [Button; 5] = [Button::NoOp, Button::Move, Button::Attack, Button::Skill, Button::Heal];

    pub fn from_index(i: usize) -> Option<Button> {
        Self::ALL.get(i).copied()
    }
}

/// Semantic role of a head; lets mode-independent code find heads by purpose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Button,
    MoveX,
    MoveY,
    /// Joint 3×3 direction, index `(dy + 1) * 3 + (dx + 1)`.
    Move,
    SkillX,
    SkillY,
    Target,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSpec {
    pub head_names: Vec<String>,
    pub head_sizes: Vec<usize>,
}

impl ActionSpec {
    pub fn solo() -> Self {
        ActionSpec {
            head_names: ["button", "move_x", "move_y", "skill_x", "skill_y", "target"].map(String::from).to_vec(),
            head_sizes: vec![5, 3, 3, 3, 3, 5],
        }
    }

    pub fn trio() -> Self {
        ActionSpec {
            head_names: ["button", "move", "skill_x", "skill_y", "target"].map(String::from).to_vec(),
            head_sizes: vec![5, 9, 3, 3, 8],
        }
    }

    pub fn n_heads(&self) -> usize {
        self.head_sizes.len()
    }

    /// Sum of head sizes: the width of a concatenated per-head layout.
    pub fn total_size(&self) -> usize {
        self.head_sizes.iter().sum()
    }

    /// Start offset of each head in the concatenated layout.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.head_sizes
            .iter()
            .map(|s| {
                let o = acc;
                acc += s;
                o
            })
            .collect()
    }

    pub fn head_kind(&self, head: usize) -> HeadKind {
        match self.head_names[head].as_str() {
            "button" => HeadKind::Button,
            "move_x" => HeadKind::MoveX,
            "move_y" => HeadKind::MoveY,
            "move" => HeadKind::Move,
            "skill_x" => HeadKind::SkillX,
            "skill_y" => HeadKind::SkillY,
            _ => HeadKind::Target,
        }
    }

    pub fn head_index(&self, kind: HeadKind) -> Option<usize> {
        (0..self.n_heads()).find(|&h| self.head_kind(h) == kind)
    }

    /// `table[button][head]`: whether `head` is executed when `button` is pressed.
    pub fn sub_action_table(&self) -> Vec<Vec<bool>> {
        Button::ALL.iter().map(|&b| (0..self.n_heads()).map(|h| head_active(b, self.head_kind(h))).collect()).collect()
    }

    /// Heads executed for `action`: the sub-action row of its button, or every
    /// head for specs without a button head.
    pub fn active_heads(&self, action: &[usize]) -> Vec<bool> {
        match self.head_index(HeadKind::Button).and_then(|b| Button::from_index(action[b])) {
            Some(button) => (0..self.n_heads()).map(|h| head_active(button, self.head_kind(h))).collect(),
            None => vec![true; self.n_heads()],
        }
    }

    /// Number of target slots (including the `none` slot 0).
    pub fn n_targets(&self) -> usize {
        self.head_index(HeadKind::Target).map(|h| self.head_sizes[h]).unwrap_or(0)
    }

    pub fn validate(&self) -> bool {
        self.head_names.len() == self.head_sizes.len() && self.head_sizes.iter().all(|&s| s > 0)
    }
}

fn head_active(button: Button, kind: HeadKind) -> bool {
    use HeadKind::*;
    match kind {
        Button => true,
        MoveX | MoveY | Move => button == self::Button::Move,
        SkillX | SkillY => button == self::Button::Skill,
        Target => matches!(button, self::Button::Attack | self::Button::Skill),
    }
}

/// One concrete choice per head.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructuredAction {
    pub head_indices: Vec<usize>,
}

impl StructuredAction {
    pub fn new(head_indices: Vec<usize>) -> Self {
        StructuredAction { head_indices }
    }

    pub fn button(&self) -> Button {
        Button::from_index(self.head_indices[0]).unwrap_or(Button::NoOp)
    }

    /// The all-neutral action: no-op button, centered offsets, no target.
    pub fn noop(spec: &ActionSpec) -> Self {
        let head_indices = (0..spec.n_heads())
            .map(|h| match spec.head_kind(h) {
                HeadKind::Button | HeadKind::Target => 0,
                _ => spec.head_sizes[h] / 2,
            })
            .collect();
        StructuredAction { head_indices }
    }

    pub fn in_bounds(&self, spec: &ActionSpec) -> bool {
        self.head_indices.len() == spec.n_heads()
            && self.head_indices.iter().zip(&spec.head_sizes).all(|(&i, &s)| i < s)
    }
}

/// Legal-action mask per head plus the button-conditioned sub-action table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionMasks {
    pub legal: Vec<Vec<bool>>,
    pub sub_action_active: Vec<Vec<bool>>,
}

impl ActionMasks {
    /// Everything legal; mostly useful in tests.
    pub fn all_legal(spec: &ActionSpec) -> Self {
        ActionMasks {
            legal: spec.head_sizes.iter().map(|&s| vec![true; s]).collect(),
            sub_action_active: spec.sub_action_table(),
        }
    }

    pub fn admits(&self, action: &StructuredAction) -> bool {
        action.head_indices.len() == self.legal.len()
            && action.head_indices.iter().zip(&self.legal).all(|(&i, l)| l.get(i).copied().unwrap_or(false))
    }

    /// First head that rejects `action`, as `(head, index)`.
    pub fn first_violation(&self, action: &StructuredAction) -> Option<(usize, usize)> {
        if action.head_indices.len() != self.legal.len() {
            return Some((action.head_indices.len().min(self.legal.len()), usize::MAX));
        }
        action
            .head_indices
            .iter()
            .zip(&self.legal)
            .enumerate()
            .find(|(_, (&i, l))| !l.get(i).copied().unwrap_or(false))
            .map(|(h, (&i, _))| (h, i))
    }

    pub fn active_row(&self, button: usize) -> &[bool] {
        &self.sub_action_active[button]
    }

    /// Concatenated legal flags, head after head.
    pub fn flat_legal(&self) -> Vec<bool> {
        self.legal.iter().flatten().copied().collect()
    }

    pub fn legal_indices(&self, head: usize) -> impl Iterator<Item = usize> + '_ {
        self.legal[head].iter().enumerate().filter(|(_, &l)| l).map(|(i, _)| i)
    }

    pub fn first_legal(&self, head: usize) -> usize {
        self.legal_indices(head).next().unwrap_or(0)
    }

    pub fn is_legal(&self, head: usize, index: usize) -> bool {
        self.legal[head].get(index).copied().unwrap_or(false)
    }
}

/// Decode a directional own-frame offset `{-1, 0, 1}` from a 3-entry head.
pub fn axis_offset(index: usize) -> i32 {
    index as i32 - 1
}

/// Decode a joint 3×3 move index into own-frame `(dx, dy)`.
pub fn joint_offset(index: usize) -> (i32, i32) {
    ((index % 3) as i32 - 1, (index / 3) as i32 - 1)
}

pub fn joint_index(dx: i32, dy: i32) -> usize {
    ((dy + 1) * 3 + (dx + 1)) as usize
}
