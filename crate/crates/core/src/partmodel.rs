//! Neutral assembly model: parts with vertex/edge/wire geometry, placed
//! instances, and embedded skill annotations.
//!
//! Part identifiers use the form `part/instance|assembly`. Skill annotations
//! are stored as strings `<order>,<skill>,<target>(;<target>)*`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{from_json_str, Error, Result};
use crate::geom::{point_serde, Point3, RigidTransform};
use crate::planner::{PlanStep, SkillKind, StepParams, TaskPlan};

const RESERVED: [char; 5] = ['/', '|', ';', ',', '\n'];

fn check_field(field: &str) -> std::result::Result<(), String> {
    if field.is_empty() {
        return Err("empty field".into());
    }
    if let Some(c) = field.chars().find(|c| RESERVED.contains(c) || *c == '\r') {
        return Err(format!("reserved character {c:?}"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartId {
    pub part: String,
    pub instance: String,
    pub assembly: String,
}

impl PartId {
    pub fn new(part: &str, instance: &str, assembly: &str) -> Result<Self> {
        let id = PartId {
            part: part.to_string(),
            instance: instance.to_string(),
            assembly: assembly.to_string(),
        };
        id.validate()?;
        Ok(id)
    }

    pub fn validate(&self) -> Result<()> {
        for f in [&self.part, &self.instance, &self.assembly] {
            check_field(f).map_err(|reason| Error::MalformedId {
                text: format_part_id(self),
                reason,
            })?;
        }
        Ok(())
    }

    /// File-name friendly form, `part_instance_assembly` with unsafe characters replaced.
    pub fn file_stem(&self) -> String {
        let clean = |s: &str| {
            s.chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
                .collect::<String>()
        };
        format!("{}__{}__{}", clean(&self.part), clean(&self.instance), clean(&self.assembly))
    }
}

pub fn parse_part_id(text: &str) -> Result<PartId> {
    let malformed = |reason: &str| Error::MalformedId {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let (part, rest) = text.split_once('/').ok_or_else(|| malformed("missing `/`"))?;
    let (instance, assembly) = rest.split_once('|').ok_or_else(|| malformed("missing `|`"))?;
    for f in [part, instance, assembly] {
        check_field(f).map_err(|r| malformed(&r))?;
    }
    Ok(PartId {
        part: part.to_string(),
        instance: instance.to_string(),
        assembly: assembly.to_string(),
    })
}

pub fn format_part_id(id: &PartId) -> String {
    format!("{}/{}|{}", id.part, id.instance, id.assembly)
}

impl fmt::Display for PartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_part_id(self))
    }
}

impl FromStr for PartId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_part_id(s)
    }
}

impl Serialize for PartId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_part_id(self))
    }
}

impl<'de> Deserialize<'de> for PartId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_part_id(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wire {
    pub name: String,
    pub edges: Vec<usize>,
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartGeometry {
    pub name: String,
    #[serde(with = "point_serde::vec")]
    pub vertices: Vec<Point3>,
    /// Polylines as ordered vertex-index lists.
    pub edges: Vec<Vec<usize>>,
    #[serde(default)]
    pub wires: Vec<Wire>,
}

impl PartGeometry {
    pub fn wire(&self, name: &str) -> Option<&Wire> {
        self.wires.iter().find(|w| w.name == name)
    }

    /// Vertex indices of a wire chained end to end, orienting each edge as
    /// needed. A closed wire repeats its first vertex at the end.
    pub fn wire_chain(&self, name: &str) -> Result<(Vec<usize>, bool)> {
        let wire = self.wire(name).ok_or_else(|| Error::UnknownWire(name.to_string()))?;
        let bad = |reason: String| Error::InvalidModel(format!("part {} wire {}: {reason}", self.name, wire.name));
        let mut edges = Vec::with_capacity(wire.edges.len());
        for &e in &wire.edges {
            let edge = self.edges.get(e).ok_or_else(|| bad(format!("edge index {e} out of range")))?;
            edges.push(edge.as_slice());
        }
        let Some(first) = edges.first() else {
            return Err(bad("no edges".into()));
        };
        let mut chain: Vec<usize> = first.to_vec();
        if let Some(second) = edges.get(1) {
            let (s0, s1) = (second[0], second[second.len() - 1]);
            let end = chain[chain.len() - 1];
            if end != s0 && end != s1 {
                if chain[0] == s0 || chain[0] == s1 {
                    chain.reverse();
                } else {
                    return Err(bad("edges 0 and 1 do not share a vertex".into()));
                }
            }
        }
        for (k, edge) in edges.iter().enumerate().skip(1) {
            let end = chain[chain.len() - 1];
            if edge[0] == end {
                chain.extend_from_slice(&edge[1..]);
            } else if edge[edge.len() - 1] == end {
                chain.extend(edge.iter().rev().skip(1));
            } else {
                return Err(bad(format!("edge {k} does not continue the chain")));
            }
        }
        if wire.closed && chain[0] != chain[chain.len() - 1] {
            return Err(bad("closed wire does not form a cycle".into()));
        }
        Ok((chain, wire.closed))
    }

    pub fn validate(&self) -> Result<()> {
        check_field(&self.name).map_err(|r| Error::InvalidModel(format!("part name {:?}: {r}", self.name)))?;
        for (i, e) in self.edges.iter().enumerate() {
            if e.len() < 2 {
                return Err(Error::InvalidModel(format!("part {} edge {i} has fewer than 2 vertices", self.name)));
            }
            if let Some(v) = e.iter().find(|&&v| v >= self.vertices.len()) {
                return Err(Error::InvalidModel(format!("part {} edge {i}: vertex index {v} out of range", self.name)));
            }
        }
        let mut names = HashSet::new();
        for w in &self.wires {
            if !names.insert(w.name.as_str()) {
                return Err(Error::InvalidModel(format!("part {} duplicate wire {}", self.name, w.name)));
            }
            self.wire_chain(&w.name)?;
        }
        Ok(())
    }

    /// Copy with every vertex moved by `g`.
    pub fn transformed(&self, g: &RigidTransform) -> PartGeometry {
        PartGeometry {
            vertices: self.vertices.iter().map(|p| g.transform_point(p)).collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    #[serde(rename = "name")]
    pub instance_name: String,
    #[serde(rename = "part")]
    pub part_name: String,
    /// Assembly frame ← part frame.
    pub placement: RigidTransform,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkillAnnotation {
    pub order: u32,
    pub skill_name: String,
    pub targets: Vec<PartId>,
}

impl fmt::Display for SkillAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},", self.order, self.skill_name)?;
        for (i, t) in self.targets.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for SkillAnnotation {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let malformed = |reason: String| Error::MalformedAnnotation {
            text: text.to_string(),
            reason,
        };
        let fields: Vec<&str> = text.split(',').collect();
        let [order, skill, targets] = fields.as_slice() else {
            return Err(malformed(format!("expected 3 comma-separated fields, got {}", fields.len())));
        };
        if order.is_empty() || !order.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed(format!("order {order:?} is not a positive integer")));
        }
        let order: u32 = order.parse().map_err(|_| malformed("order out of range".into()))?;
        if order == 0 {
            return Err(malformed("order must be positive".into()));
        }
        check_field(skill).map_err(|r| malformed(format!("skill name: {r}")))?;
        let targets = targets
            .split(';')
            .map(parse_part_id)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| malformed(e.to_string()))?;
        if targets.len() > 2 {
            return Err(malformed(format!("{} targets, at most 2 allowed", targets.len())));
        }
        Ok(SkillAnnotation {
            order,
            skill_name: skill.to_string(),
            targets,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblyModel {
    #[serde(rename = "assembly")]
    pub assembly_name: String,
    pub parts: Vec<PartGeometry>,
    pub instances: Vec<Instance>,
    /// Raw annotation records; parsed by [`extract_skills`].
    #[serde(default)]
    pub annotations: Vec<String>,
}

impl AssemblyModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let model: AssemblyModel = from_json_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("assembly serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        check_field(&self.assembly_name)
            .map_err(|r| Error::InvalidModel(format!("assembly name {:?}: {r}", self.assembly_name)))?;
        let mut part_names = HashSet::new();
        for p in &self.parts {
            p.validate()?;
            if !part_names.insert(p.name.as_str()) {
                return Err(Error::InvalidModel(format!("duplicate part {}", p.name)));
            }
        }
        let mut seen = BTreeSet::new();
        for inst in &self.instances {
            check_field(&inst.instance_name)
                .map_err(|r| Error::InvalidModel(format!("instance name {:?}: {r}", inst.instance_name)))?;
            if !part_names.contains(inst.part_name.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "instance {} refers to unknown part {}",
                    inst.instance_name, inst.part_name
                )));
            }
            if !seen.insert((inst.part_name.as_str(), inst.instance_name.as_str())) {
                return Err(Error::InvalidModel(format!(
                    "duplicate instance {}/{}",
                    inst.part_name, inst.instance_name
                )));
            }
        }
        Ok(())
    }

    pub fn part(&self, name: &str) -> Option<&PartGeometry> {
        self.parts.iter().find(|p| p.name == name)
    }

    pub fn instance(&self, id: &PartId) -> Option<&Instance> {
        if id.assembly != self.assembly_name {
            return None;
        }
        self.instances
            .iter()
            .find(|i| i.part_name == id.part && i.instance_name == id.instance)
    }

    /// Instance placement and part geometry for a target id.
    pub fn resolve(&self, id: &PartId) -> Result<(&Instance, &PartGeometry)> {
        let inst = self.instance(id).ok_or_else(|| Error::UnknownTarget(id.to_string()))?;
        let part = self
            .part(&inst.part_name)
            .ok_or_else(|| Error::UnknownTarget(id.to_string()))?;
        Ok((inst, part))
    }

    pub fn part_id(&self, inst: &Instance) -> PartId {
        PartId {
            part: inst.part_name.clone(),
            instance: inst.instance_name.clone(),
            assembly: self.assembly_name.clone(),
        }
    }
}

/// Replace the model's annotations with the plan's skill sequence.
pub fn annotate_skills(model: &AssemblyModel, plan: &TaskPlan) -> Result<AssemblyModel> {
    let mut annotations = Vec::with_capacity(plan.steps.len());
    for step in &plan.steps {
        for t in &step.targets {
            model.resolve(t)?;
        }
        let ann = SkillAnnotation {
            order: step.order,
            skill_name: step.skill.name().to_string(),
            targets: step.targets.clone(),
        };
        annotations.push(ann.to_string());
    }
    Ok(AssemblyModel {
        annotations,
        ..model.clone()
    })
}

/// Read the annotated skill sequence back as a plan skeleton (no parameters).
pub fn extract_skills(model: &AssemblyModel) -> Result<TaskPlan> {
    let mut anns = model
        .annotations
        .iter()
        .map(|a| a.parse::<SkillAnnotation>())
        .collect::<Result<Vec<_>>>()?;
    anns.sort_by_key(|a| a.order);
    for w in anns.windows(2) {
        if w[0].order == w[1].order {
            return Err(Error::DuplicateOrder(w[0].order));
        }
    }
    let mut steps = Vec::with_capacity(anns.len());
    for (i, a) in anns.into_iter().enumerate() {
        if a.order as usize != i + 1 {
            return Err(Error::MalformedAnnotation {
                text: a.to_string(),
                reason: format!("orders are not contiguous from 1 (expected {})", i + 1),
            });
        }
        let skill: SkillKind = a.skill_name.parse().map_err(|_| Error::MalformedAnnotation {
            text: a.to_string(),
            reason: format!("unknown skill {:?}", a.skill_name),
        })?;
        steps.push(PlanStep {
            order: a.order,
            skill,
            targets: a.targets,
            params: StepParams::default(),
        });
    }
    Ok(TaskPlan {
        name: model.assembly_name.clone(),
        steps,
    })
}
