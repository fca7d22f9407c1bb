//! Class labels, categories and the four classification tasks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the nine single-arm imagery classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    ReachLeft,
    ReachRight,
    ReachForward,
    ReachBackward,
    ReachUp,
    ReachDown,
    Grasp,
    Twist,
    Rest,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 9] = [
        ClassLabel::ReachLeft,
        ClassLabel::ReachRight,
        ClassLabel::ReachForward,
        ClassLabel::ReachBackward,
        ClassLabel::ReachUp,
        ClassLabel::ReachDown,
        ClassLabel::Grasp,
        ClassLabel::Twist,
        ClassLabel::Rest,
    ];

    pub fn category(self) -> Category {
        match self {
            ClassLabel::ReachLeft
            | ClassLabel::ReachRight
            | ClassLabel::ReachForward
            | ClassLabel::ReachBackward
            | ClassLabel::ReachUp
            | ClassLabel::ReachDown => Category::Arm,
            ClassLabel::Grasp | ClassLabel::Twist => Category::Hand,
            ClassLabel::Rest => Category::Rest,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::ReachLeft => "reach_left",
            ClassLabel::ReachRight => "reach_right",
            ClassLabel::ReachForward => "reach_forward",
            ClassLabel::ReachBackward => "reach_backward",
            ClassLabel::ReachUp => "reach_up",
            ClassLabel::ReachDown => "reach_down",
            ClassLabel::Grasp => "grasp",
            ClassLabel::Twist => "twist",
            ClassLabel::Rest => "rest",
        }
    }

    pub fn index(self) -> usize {
        ClassLabel::ALL.iter().position(|&c| c == self).expect("label listed in ALL")
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassLabel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Data(format!("unknown class label {s:?}")))
    }
}

/// Coarse category decided by the shared layer. Order fixes the one-hot layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Arm,
    Hand,
    Rest,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Arm, Category::Hand, Category::Rest];

    pub fn index(self) -> usize {
        match self {
            Category::Arm => 0,
            Category::Hand => 1,
            Category::Rest => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Arm => "arm",
            Category::Hand => "hand",
            Category::Rest => "rest",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    ThreeClass,
    FiveClass,
    SevenHor,
    SevenVer,
}

impl TaskId {
    pub const ALL: [TaskId; 4] = [TaskId::ThreeClass, TaskId::FiveClass, TaskId::SevenHor, TaskId::SevenVer];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::ThreeClass => "three_class",
            TaskId::FiveClass => "five_class",
            TaskId::SevenHor => "seven_hor",
            TaskId::SevenVer => "seven_ver",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    /// Accepts the long names and the short CLI forms `3`, `5`, `7hor`, `7ver`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3" | "three_class" => Ok(TaskId::ThreeClass),
            "5" | "five_class" => Ok(TaskId::FiveClass),
            "7hor" | "seven_hor" => Ok(TaskId::SevenHor),
            "7ver" | "seven_ver" => Ok(TaskId::SevenVer),
            other => Err(Error::Config(format!("unknown task id {other:?}"))),
        }
    }
}

/// Which sub-network handles a label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Arm,
    Hand,
}

/// Hand sub-network output order.
pub const HAND_CLASSES: [ClassLabel; 2] = [ClassLabel::Grasp, ClassLabel::Twist];

/// A classification task: its classes in one-hot order and the arm subset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    /// Fine labels included in the task, in listed order. For the 3-class
    /// task every label is included and the output classes are the categories.
    pub labels: Vec<ClassLabel>,
    /// Arm labels in arm-head output order; its length is `M`.
    pub arm_classes: Vec<ClassLabel>,
}

impl TaskSpec {
    pub fn new(id: TaskId) -> Self {
        use ClassLabel::*;
        let arm_classes = match id {
            TaskId::ThreeClass => vec![],
            TaskId::FiveClass => vec![ReachLeft, ReachRight],
            TaskId::SevenHor => vec![ReachLeft, ReachRight, ReachForward, ReachBackward],
            TaskId::SevenVer => vec![ReachLeft, ReachRight, ReachUp, ReachDown],
        };
        Self::with_arm_classes(id, arm_classes).expect("built-in task definitions are valid")
    }

    /// A task with a custom arm-direction set (hand and rest classes are fixed).
    pub fn with_arm_classes(id: TaskId, arm_classes: Vec<ClassLabel>) -> Result<Self> {
        if id == TaskId::ThreeClass {
            if !arm_classes.is_empty() {
                return Err(Error::Config("the 3-class task has no arm sub-classes".into()));
            }
            return Ok(Self {
                id,
                labels: ClassLabel::ALL.to_vec(),
                arm_classes,
            });
        }
        if arm_classes.len() < 2 {
            return Err(Error::Config("a task needs at least two arm classes".into()));
        }
        for (i, c) in arm_classes.iter().enumerate() {
            if c.category() != Category::Arm {
                return Err(Error::Config(format!("{c} is not an arm-reaching class")));
            }
            if arm_classes[..i].contains(c) {
                return Err(Error::Config(format!("{c} listed twice")));
            }
        }
        let mut labels = arm_classes.clone();
        labels.extend(HAND_CLASSES);
        labels.push(ClassLabel::Rest);
        Ok(Self {
            id,
            labels,
            arm_classes,
        })
    }

    /// Number of arm classes (`M`); zero for the 3-class task.
    pub fn m(&self) -> usize {
        self.arm_classes.len()
    }

    pub fn is_categorical(&self) -> bool {
        self.id == TaskId::ThreeClass
    }

    pub fn num_classes(&self) -> usize {
        if self.is_categorical() {
            3
        } else {
            self.labels.len()
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        if self.is_categorical() {
            Category::ALL.iter().map(|c| c.name().to_string()).collect()
        } else {
            self.labels.iter().map(|l| l.name().to_string()).collect()
        }
    }

    pub fn contains(&self, label: ClassLabel) -> bool {
        self.labels.contains(&label)
    }

    /// Output-class index of `label` in this task.
    pub fn class_index(&self, label: ClassLabel) -> Result<usize> {
        if !self.contains(label) {
            return Err(Error::Data(format!("label {label} is not part of task {}", self.id)));
        }
        if self.is_categorical() {
            Ok(label.category().index())
        } else {
            Ok(self.labels.iter().position(|&l| l == label).expect("checked"))
        }
    }

    /// Output-class index of a routed prediction.
    pub fn routed_index(&self, category: Category, sub: usize) -> usize {
        if self.is_categorical() {
            return category.index();
        }
        let label = match category {
            Category::Rest => ClassLabel::Rest,
            Category::Arm => self.arm_classes[sub],
            Category::Hand => HAND_CLASSES[sub],
        };
        self.labels.iter().position(|&l| l == label).expect("routed label in task")
    }
}

/// Training targets for one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Targets {
    pub category: Category,
    /// Head and one-hot position inside that head's output; `None` for rest
    /// and for every trial of the 3-class task.
    pub sub: Option<(Head, usize)>,
}

impl Targets {
    pub fn category_onehot(&self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.category.index()] = 1.0;
        v
    }

    /// One-hot sub-target of width `M` (arm) or 2 (hand).
    pub fn sub_onehot(&self, m: usize) -> Option<Vec<f64>> {
        self.sub.map(|(head, idx)| {
            let width = match head {
                Head::Arm => m,
                Head::Hand => 2,
            };
            let mut v = vec![0.0; width];
            v[idx] = 1.0;
            v
        })
    }
}

pub fn to_targets(label: ClassLabel, spec: &TaskSpec) -> Result<Targets> {
    if !spec.contains(label) {
        return Err(Error::Data(format!("label {label} is not part of task {}", spec.id)));
    }
    let category = label.category();
    if spec.is_categorical() {
        return Ok(Targets { category, sub: None });
    }
    let sub = match category {
        Category::Arm => Some((
            Head::Arm,
            spec.arm_classes.iter().position(|&c| c == label).expect("arm label in task"),
        )),
        Category::Hand => Some((
            Head::Hand,
            HAND_CLASSES.iter().position(|&c| c == label).expect("hand label"),
        )),
        Category::Rest => None,
    };
    Ok(Targets { category, sub })
}
