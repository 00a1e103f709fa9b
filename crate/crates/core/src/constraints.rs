//! Equality-constraint descriptions: where a constraint holds (the set `C`),
//! how far a point is from it, and what the model must equal there.
//!
//! Targets defined only on `C` are extended to arbitrary inputs by evaluating
//! them at the projection of the input onto `C`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

/// Built-in target functions that can be named in config files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetFn {
    Constant(f64),
    /// `coeff * x[axis]^power`.
    Monomial {
        axis: usize,
        coeff: f64,
        power: i32,
    },
}

impl TargetFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            TargetFn::Constant(c) => c,
            TargetFn::Monomial { axis, coeff, power } => coeff * x[axis].powi(power),
        }
    }

    /// Analytic partial derivative along `axis`.
    pub fn partial(&self, axis: usize) -> TargetFn {
        match *self {
            TargetFn::Monomial { axis: a, coeff, power } if a == axis && power != 0 => TargetFn::Monomial {
                axis: a,
                coeff: coeff * power as f64,
                power: power - 1,
            },
            _ => TargetFn::Constant(0.0),
        }
    }

    fn required_dim(&self) -> usize {
        match self {
            TargetFn::Constant(_) => 0,
            TargetFn::Monomial { axis, .. } => axis + 1,
        }
    }
}

pub type DistanceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ProjectionFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A set described only through a caller-supplied distance function.
#[derive(Clone)]
pub struct Region {
    pub distance: DistanceFn,
    pub projection: Option<ProjectionFn>,
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Region")
            .field("projection", &self.projection.is_some())
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum ConstraintSet {
    Points(Vec<Vec<f64>>),
    /// The hyperplane `x[axis] = level`.
    Plane {
        axis: usize,
        level: f64,
    },
    Region(Region),
}

impl ConstraintSet {
    pub fn points(points: Vec<Vec<f64>>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| invalid("a point-list constraint needs at least one point"))?;
        let d = first.len();
        if d == 0 {
            return Err(invalid("constraint points need dimension >= 1"));
        }
        for p in &points {
            if p.len() != d {
                return Err(invalid("constraint points have mixed dimensions"));
            }
            if !p.iter().all(|v| v.is_finite()) {
                return Err(invalid("constraint points must be finite"));
            }
        }
        Ok(ConstraintSet::Points(points))
    }

    pub fn plane(axis: usize, level: f64) -> Result<Self> {
        if !level.is_finite() {
            return Err(invalid("plane level must be finite"));
        }
        Ok(ConstraintSet::Plane { axis, level })
    }

    /// Checks the set against the input dimension.
    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            ConstraintSet::Points(pts) if pts[0].len() != d => Err(invalid(format!(
                "constraint points have dimension {} but inputs have {d}",
                pts[0].len()
            ))),
            ConstraintSet::Plane { axis, .. } if *axis >= d => {
                Err(invalid(format!("plane axis {axis} out of range for dimension {d}")))
            }
            _ => Ok(()),
        }
    }

    /// Index of the nearest point; ties go to the lowest index.
    fn nearest_point(pts: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, p) in pts.iter().enumerate() {
            let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        (best.0, best.1.sqrt())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if !x.iter().all(|v| v.is_finite()) {
            return Err(invalid("query point must be finite"));
        }
        self.check_dim(x.len())
    }
}

/// Euclidean distance from `x` to the set; zero exactly on the set.
pub fn distance(set: &ConstraintSet, x: &[f64]) -> Result<f64> {
    set.check_point(x)?;
    Ok(match set {
        ConstraintSet::Points(pts) => ConstraintSet::nearest_point(pts, x).1,
        ConstraintSet::Plane { axis, level } => (x[*axis] - level).abs(),
        ConstraintSet::Region(r) => {
            let d = (r.distance)(x);
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::Numerical(format!("region distance returned {d}")));
            }
            d
        }
    })
}

/// Nearest point of the set.
pub fn project(set: &ConstraintSet, x: &[f64]) -> Result<Vec<f64>> {
    set.check_point(x)?;
    match set {
        ConstraintSet::Points(pts) => Ok(pts[ConstraintSet::nearest_point(pts, x).0].clone()),
        ConstraintSet::Plane { axis, level } => {
            let mut p = x.to_vec();
            p[*axis] = *level;
            Ok(p)
        }
        ConstraintSet::Region(r) => match &r.projection {
            Some(proj) => Ok(proj(x)),
            None => Err(Error::Unsupported("region constraint has no projection".into())),
        },
    }
}

/// `d distance / d x_axis`, taken as zero on the set itself.
pub fn distance_partial(set: &ConstraintSet, x: &[f64], axis: usize) -> Result<f64> {
    set.check_point(x)?;
    match set {
        ConstraintSet::Points(pts) => {
            let (i, d) = ConstraintSet::nearest_point(pts, x);
            Ok(if d > 0.0 { (x[axis] - pts[i][axis]) / d } else { 0.0 })
        }
        ConstraintSet::Plane { axis: a, level } => Ok(if *a == axis {
            let s = x[*a] - level;
            if s > 0.0 {
                1.0
            } else if s < 0.0 {
                -1.0
            } else {
                0.0
            }
        } else {
            0.0
        }),
        ConstraintSet::Region(_) => Err(Error::Unsupported(
            "region constraints have no distance gradient".into(),
        )),
    }
}

/// What the model has to match on the constraint set.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintTarget {
    Value(TargetFn),
    Derivative {
        axis: usize,
        g: TargetFn,
    },
    /// A derivative target whose antiderivative along `axis` is known.
    DerivativeIntegrated {
        axis: usize,
        g: TargetFn,
        antiderivative: Option<TargetFn>,
    },
}

impl ConstraintTarget {
    pub fn kind(&self) -> TargetKind {
        match self {
            ConstraintTarget::Value(_) => TargetKind::Value,
            ConstraintTarget::Derivative { .. } => TargetKind::Derivative,
            ConstraintTarget::DerivativeIntegrated { .. } => TargetKind::DerivativeIntegrated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Value,
    Derivative,
    DerivativeIntegrated,
}

#[derive(Debug, Clone)]
pub struct ConstraintSpec {
    pub set: ConstraintSet,
    pub target: ConstraintTarget,
    gamma: f64,
}

impl ConstraintSpec {
    pub fn new(set: ConstraintSet, target: ConstraintTarget, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(invalid(format!(
                "locality parameter gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self { set, target, gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        self.set.check_dim(d)?;
        let (fns, axis): (Vec<&TargetFn>, Option<usize>) = match &self.target {
            ConstraintTarget::Value(f) => (vec![f], None),
            ConstraintTarget::Derivative { axis, g } => (vec![g], Some(*axis)),
            ConstraintTarget::DerivativeIntegrated {
                axis,
                g,
                antiderivative,
            } => {
                let mut v = vec![g];
                v.extend(antiderivative.iter());
                (v, Some(*axis))
            }
        };
        if let Some(a) = axis {
            if a >= d {
                return Err(invalid(format!("derivative axis {a} out of range for dimension {d}")));
            }
        }
        if fns.iter().any(|f| f.required_dim() > d) {
            return Err(invalid(format!(
                "target function refers to an axis beyond dimension {d}"
            )));
        }
        Ok(())
    }

    /// The value-form target blended into predictions, if there is one:
    /// the value function itself, or the antiderivative of an integrable
    /// derivative target.
    pub fn value_fn(&self) -> Option<TargetFn> {
        match &self.target {
            ConstraintTarget::Value(f) => Some(*f),
            ConstraintTarget::DerivativeIntegrated { antiderivative, .. } => *antiderivative,
            ConstraintTarget::Derivative { .. } => None,
        }
    }

    /// The value target evaluated at the projection of `x` onto the set.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        let f = self
            .value_fn()
            .ok_or_else(|| invalid("constraint has no value-form target"))?;
        Ok(f.eval(&project(&self.set, x)?))
    }

    /// `d/dx_axis` of [`Self::value_at`].
    pub fn value_partial_at(&self, x: &[f64], axis: usize) -> Result<f64> {
        let f = self
            .value_fn()
            .ok_or_else(|| invalid("constraint has no value-form target"))?;
        match &self.set {
            ConstraintSet::Points(_) => Ok(0.0),
            ConstraintSet::Plane { axis: a, .. } if *a == axis => Ok(0.0),
            ConstraintSet::Plane { .. } => Ok(f.partial(axis).eval(&project(&self.set, x)?)),
            ConstraintSet::Region(_) => Err(Error::Unsupported("region constraints have no target gradient".into())),
        }
    }

    /// Derivative target `g` evaluated at the projection of `x`.
    pub fn derivative_target_at(&self, x: &[f64]) -> Result<(usize, f64)> {
        match &self.target {
            ConstraintTarget::Derivative { axis, g } | ConstraintTarget::DerivativeIntegrated { axis, g, .. } => {
                Ok((*axis, g.eval(&project(&self.set, x)?)))
            }
            ConstraintTarget::Value(_) => Err(invalid("constraint has a value target, not a derivative target")),
        }
    }
}

// ---------------------------------------------------------------------------
// Text descriptors, e.g.
//   set=points:0;1.5707963267948966 target=value:const:1 gamma=0.0001
//   set=plane:0:0 target=integrated:1:mono:1:3:2:mono:1:1:3 gamma=0.5

impl fmt::Display for TargetFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetFn::Constant(c) => write!(f, "const:{c}"),
            TargetFn::Monomial { axis, coeff, power } => write!(f, "mono:{axis}:{coeff}:{power}"),
        }
    }
}

fn next_tok<'a>(it: &mut impl Iterator<Item = &'a str>, what: &str) -> Result<&'a str> {
    it.next()
        .ok_or_else(|| invalid(format!("descriptor ended early, expected {what}")))
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| invalid(format!("bad {what} '{s}'")))
}

fn parse_target_fn<'a>(it: &mut impl Iterator<Item = &'a str>) -> Result<TargetFn> {
    match next_tok(it, "target function")? {
        "const" => Ok(TargetFn::Constant(parse_num(next_tok(it, "constant")?, "constant")?)),
        "mono" => Ok(TargetFn::Monomial {
            axis: parse_num(next_tok(it, "axis")?, "axis")?,
            coeff: parse_num(next_tok(it, "coefficient")?, "coefficient")?,
            power: parse_num(next_tok(it, "power")?, "power")?,
        }),
        other => Err(invalid(format!("unknown target function '{other}'"))),
    }
}

impl FromStr for TargetFn {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.split(':');
        let f = parse_target_fn(&mut it)?;
        if it.next().is_some() {
            return Err(invalid(format!("trailing tokens in target '{s}'")));
        }
        Ok(f)
    }
}

impl fmt::Display for ConstraintTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintTarget::Value(g) => write!(f, "value:{g}"),
            ConstraintTarget::Derivative { axis, g } => write!(f, "derivative:{axis}:{g}"),
            ConstraintTarget::DerivativeIntegrated {
                axis,
                g,
                antiderivative,
            } => {
                write!(f, "integrated:{axis}:{g}")?;
                if let Some(a) = antiderivative {
                    write!(f, ":{a}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for ConstraintTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.split(':').peekable();
        let target = match next_tok(&mut it, "target kind")? {
            "value" => ConstraintTarget::Value(parse_target_fn(&mut it)?),
            "derivative" => ConstraintTarget::Derivative {
                axis: parse_num(next_tok(&mut it, "axis")?, "axis")?,
                g: parse_target_fn(&mut it)?,
            },
            "integrated" => {
                let axis = parse_num(next_tok(&mut it, "axis")?, "axis")?;
                let g = parse_target_fn(&mut it)?;
                let antiderivative = if it.peek().is_some() {
                    Some(parse_target_fn(&mut it)?)
                } else {
                    None
                };
                ConstraintTarget::DerivativeIntegrated {
                    axis,
                    g,
                    antiderivative,
                }
            }
            other => return Err(invalid(format!("unknown target kind '{other}'"))),
        };
        if it.next().is_some() {
            return Err(invalid(format!("trailing tokens in target '{s}'")));
        }
        Ok(target)
    }
}

impl fmt::Display for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintSet::Points(pts) => {
                f.write_str("points:")?;
                for (i, p) in pts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    for (k, v) in p.iter().enumerate() {
                        if k > 0 {
                            f.write_str(",")?;
                        }
                        write!(f, "{v}")?;
                    }
                }
                Ok(())
            }
            ConstraintSet::Plane { axis, level } => write!(f, "plane:{axis}:{level}"),
            ConstraintSet::Region(_) => f.write_str("region"),
        }
    }
}

impl FromStr for ConstraintSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("bad constraint set '{s}'")))?;
        match kind {
            "points" => {
                let pts = rest
                    .split(';')
                    .map(|p| {
                        p.split(',')
                            .map(|v| parse_num(v, "coordinate"))
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                ConstraintSet::points(pts)
            }
            "plane" => {
                let (axis, level) = rest
                    .split_once(':')
                    .ok_or_else(|| invalid(format!("plane set '{s}' needs axis and level")))?;
                ConstraintSet::plane(parse_num(axis, "axis")?, parse_num(level, "level")?)
            }
            other => Err(invalid(format!("unknown constraint set kind '{other}'"))),
        }
    }
}

impl fmt::Display for ConstraintSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "set={} target={} gamma={}", self.set, self.target, self.gamma)
    }
}

impl FromStr for ConstraintSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (mut set, mut target, mut gamma) = (None, None, None);
        for field in s.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| invalid(format!("constraint field '{field}' is not key=value")))?;
            match key {
                "set" => set = Some(value.parse::<ConstraintSet>()?),
                "target" => target = Some(value.parse::<ConstraintTarget>()?),
                "gamma" => gamma = Some(parse_num::<f64>(value, "gamma")?),
                other => return Err(invalid(format!("unknown constraint field '{other}'"))),
            }
        }
        ConstraintSpec::new(
            set.ok_or_else(|| invalid("constraint descriptor is missing set="))?,
            target.ok_or_else(|| invalid("constraint descriptor is missing target="))?,
            gamma.ok_or_else(|| invalid("constraint descriptor is missing gamma="))?,
        )
    }
}
