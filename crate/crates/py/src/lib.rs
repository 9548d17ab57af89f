//! Python bindings. Poses cross the boundary as nested lists (4x4 row-major),
//! vectors as flat lists; everything else is a thin wrapper over the core types.

use std::collections::BTreeSet;

use bimorph_core::chain::{ChainDesign, ARM_DOF};
use bimorph_core::data::{self, GeneratorSettings};
use bimorph_core::design::{self, DEFAULT_CENTER_DISTANCE};
use bimorph_core::dexterity::{evaluate_cloud, jointly_normalized, DexterityReport};
use bimorph_core::motion::{simulate_transition, transition_fixture};
use bimorph_core::se3::{self, Rotation};
use bimorph_core::{AnnealSettings, CostSettings, DesignVector, IkSettings, JointVector, TaskLabel, TransitionSettings};
use nalgebra::{Matrix3, Vector3, Vector6};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(e: bimorph_core::Error) -> PyErr {
    match e {
        bimorph_core::Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn vec3(v: [f64; 3]) -> Vector3<f64> {
    Vector3::from(v)
}

fn joints(q: Vec<f64>) -> PyResult<JointVector> {
    if q.len() != ARM_DOF {
        return Err(PyValueError::new_err(format!("expected {ARM_DOF} joint values, got {}", q.len())));
    }
    Ok(JointVector::from_vec(q))
}

/// Rigid transform in SE(3).
#[pyclass(name = "Pose", module = "bimorph", from_py_object)]
#[derive(Clone)]
pub struct PyPose(se3::Pose);

#[pymethods]
impl PyPose {
    /// Builds a pose from a 4x4 homogeneous matrix; the rotation block is projected onto SO(3).
    #[new]
    fn new(matrix: [[f64; 4]; 4]) -> Self {
        let r = Matrix3::from_fn(|i, j| matrix[i][j]);
        let t = Vector3::new(matrix[0][3], matrix[1][3], matrix[2][3]);
        PyPose(se3::Pose::new(Rotation::from_matrix_projected(&r), t))
    }

    #[staticmethod]
    fn identity() -> Self {
        PyPose(se3::Pose::identity())
    }

    /// Exponential of a twist `(wx, wy, wz, vx, vy, vz)` scaled by `theta`.
    #[staticmethod]
    #[pyo3(signature = (twist, theta=1.0))]
    fn exp(twist: [f64; 6], theta: f64) -> Self {
        PyPose(se3::exp_twist(&se3::Twist::from_vector(&Vector6::from(twist)), theta))
    }

    /// Unit screw and angle with `exp(screw, theta) == self`.
    fn log(&self) -> PyResult<([f64; 6], f64)> {
        let (xi, theta) = se3::log_pose(&self.0).map_err(to_py)?;
        Ok((xi.to_vector().into(), theta))
    }

    fn matrix(&self) -> [[f64; 4]; 4] {
        let m = self.0.matrix();
        std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
    }

    fn translation(&self) -> [f64; 3] {
        self.0.translation.into()
    }

    fn inverse(&self) -> Self {
        PyPose(self.0.inverse())
    }

    /// 6x6 adjoint, rows and columns in (angular, linear) order.
    fn adjoint(&self) -> [[f64; 6]; 6] {
        let m = se3::adjoint(&self.0);
        std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
    }

    fn __mul__(&self, other: &PyPose) -> Self {
        PyPose(self.0 * other.0)
    }

    fn __repr__(&self) -> String {
        let t = self.0.translation;
        format!("Pose(t=[{:.4}, {:.4}, {:.4}], angle={:.4})", t.x, t.y, t.z, self.0.rotation.angle())
    }
}

/// Seven-joint arm morphology: axis directions, axis points and base offset.
#[pyclass(name = "Design", module = "bimorph", from_py_object)]
#[derive(Clone)]
pub struct PyDesign {
    design: DesignVector,
    tool_offset: Vector3<f64>,
}

impl PyDesign {
    fn chain(&self) -> ChainDesign {
        self.design.arm_chain(self.tool_offset)
    }
}

#[pymethods]
impl PyDesign {
    /// Flat 32-value parameter vector (see `to_vec`).
    #[new]
    #[pyo3(signature = (params, tool_offset=[0.0, 0.0, -0.03]))]
    fn new(params: Vec<f64>, tool_offset: [f64; 3]) -> PyResult<Self> {
        let design = DesignVector::from_slice(&params).map_err(to_py)?;
        design.validate().map_err(to_py)?;
        Ok(PyDesign { design, tool_offset: vec3(tool_offset) })
    }

    #[staticmethod]
    fn anthropomorphic() -> Self {
        PyDesign { design: DesignVector::anthropomorphic(), tool_offset: CostSettings::default().tool_offset() }
    }

    #[staticmethod]
    #[pyo3(signature = (seed, base_offset=[0.0, 0.0, 0.0]))]
    fn random(seed: u64, base_offset: [f64; 3]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PyDesign {
            design: DesignVector::random_feasible(&mut rng, vec3(base_offset)),
            tool_offset: CostSettings::default().tool_offset(),
        }
    }

    fn to_vec(&self) -> Vec<f64> {
        self.design.to_vec()
    }

    /// Unit axis directions, one per joint.
    fn axes(&self) -> Vec<[f64; 3]> {
        (0..ARM_DOF).map(|i| self.design.axis(i).into()).collect()
    }

    /// Points on the joint axes, one per joint (the wrist shares one).
    fn points(&self) -> Vec<[f64; 3]> {
        self.chain().joints.iter().map(|j| j.point.into()).collect()
    }

    fn fk(&self, q: Vec<f64>) -> PyResult<PyPose> {
        Ok(PyPose(self.chain().fk(&joints(q)?).map_err(to_py)?))
    }

    /// 6x7 spatial Jacobian, rows in (angular, linear) order.
    fn jacobian(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let j = self.chain().spatial_jacobian(&joints(q)?).map_err(to_py)?;
        Ok((0..6).map(|r| j.row(r).iter().copied().collect()).collect())
    }

    /// Damped least-squares IK; returns a dict with `q`, `converged`, `residual`, `iterations`.
    #[pyo3(signature = (target, seed=None))]
    fn ik<'py>(&self, py: Python<'py>, target: &PyPose, seed: Option<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
        let chain = self.chain();
        let seed = match seed {
            Some(q) => joints(q)?,
            None => chain.mid_configuration(),
        };
        let r = bimorph_core::ik::solve_ik(&chain, &target.0, &seed, &IkSettings::default()).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("q", r.q.as_slice().to_vec())?;
        d.set_item("converged", r.converged)?;
        d.set_item("residual", r.residual_twist_norm)?;
        d.set_item("iterations", r.iterations)?;
        Ok(d)
    }

    /// Workspace-fit cost over a pose cloud (lower is better).
    fn cost(&self, cloud: &PyCloud) -> f64 {
        design::design_cost(&self.design, &cloud.0, &CostSettings::default())
    }

    fn __repr__(&self) -> String {
        format!("Design(wrist_point={:?})", <[f64; 3]>::from(self.design.wrist_point()))
    }
}

/// Weighted set of local-variation poses.
#[pyclass(name = "PoseCloud", module = "bimorph", from_py_object)]
#[derive(Clone)]
pub struct PyCloud(data::PoseCloud);

#[pymethods]
impl PyCloud {
    /// Synthesizes a task recording and reduces it to a resampled cloud.
    #[staticmethod]
    #[pyo3(signature = (task, seed, duration=20.0, window=2.0, count=500))]
    fn synthesize(task: &str, seed: u64, duration: f64, window: f64, count: usize) -> PyResult<Self> {
        let label: TaskLabel = task.parse().map_err(to_py)?;
        let settings = GeneratorSettings { duration, ..Default::default() };
        let traj = data::synthesize_task(label, &settings, seed).map_err(to_py)?;
        let local = data::extract_local_variation(&traj, window).map_err(to_py)?;
        Ok(PyCloud(data::cluster_resample(&local, 0.005, count, seed).map_err(to_py)?))
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(PyCloud(data::read_cloud_csv(file, BTreeSet::new()).map_err(to_py)?))
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        data::write_cloud_csv(&self.0, file).map_err(to_py)
    }

    #[staticmethod]
    fn merged(clouds: Vec<PyCloud>) -> Self {
        PyCloud(data::PoseCloud::merged(clouds.iter().map(|c| &c.0)))
    }

    fn poses(&self) -> Vec<PyPose> {
        self.0.poses().map(|p| PyPose(*p)).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Simulated annealing from the anthropomorphic layout; returns the best design and the best-so-far cost per iteration.
#[pyfunction]
#[pyo3(signature = (cloud, max_iters=2000, seed=0))]
fn optimize(py: Python<'_>, cloud: &PyCloud, max_iters: usize, seed: u64) -> PyResult<(PyDesign, Vec<f64>)> {
    let settings = AnnealSettings { max_iters, rng_seed: seed, ..Default::default() };
    let tool_offset = settings.cost.tool_offset();
    let (design, trace) = py
        .detach(|| design::anneal(&DesignVector::anthropomorphic(), &cloud.0, &settings))
        .map_err(to_py)?;
    Ok((PyDesign { design, tool_offset }, trace.steps.iter().map(|s| s.best_cost).collect()))
}

fn report_dict<'py>(py: Python<'py>, r: &DexterityReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("condition", r.points.iter().map(|p| p.condition).collect::<Vec<_>>())?;
    d.set_item("manipulability", r.points.iter().map(|p| p.manipulability).collect::<Vec<_>>())?;
    d.set_item("joint_limit", r.points.iter().map(|p| p.joint_limit).collect::<Vec<_>>())?;
    d.set_item("composite", r.composite.clone())?;
    d.set_item("composite_mean", r.summary.composite.mean)?;
    d.set_item("composite_std", r.summary.composite.std)?;
    Ok(d)
}

/// Dexterity of each design over each cloud under one shared normalization; returns a nested list `[design][cloud]` of dicts.
#[pyfunction]
fn compare_dexterity<'py>(
    py: Python<'py>,
    designs: Vec<PyDesign>,
    clouds: Vec<PyCloud>,
) -> PyResult<Vec<Vec<Bound<'py, PyDict>>>> {
    let settings = CostSettings::default();
    let mut raw = Vec::new();
    for d in &designs {
        let chain = d.chain();
        for c in &clouds {
            raw.push(evaluate_cloud(&chain, &c.0, &settings).map_err(to_py)?);
        }
    }
    let reports = jointly_normalized(raw);
    reports
        .chunks(clouds.len().max(1))
        .map(|row| row.iter().map(|r| report_dict(py, r)).collect())
        .collect()
}

/// Runs the workspace transition on the bilateral system built from `design`;
/// returns time, composite dexterity (normalized across both runs when `both`), potential and tracking error.
#[pyfunction]
#[pyo3(signature = (design, informed=true, displacement=[0.15, 0.1, -0.1], duration=4.0))]
fn transition<'py>(
    py: Python<'py>,
    design: &PyDesign,
    informed: bool,
    displacement: [f64; 3],
    duration: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let settings = TransitionSettings { duration, ..Default::default() };
    let sys = design.design.to_system(design.tool_offset, DEFAULT_CENTER_DISTANCE, ChainDesign::default_positioner());
    let (w1, w2) = transition_fixture(&sys, &settings, vec3(displacement)).map_err(to_py)?;
    let trace = simulate_transition(&sys, sys.arm.wrist_point(), &w1, &w2, informed, &settings).map_err(to_py)?;
    let report = DexterityReport::new(trace.dexterity());
    let d = report_dict(py, &report)?;
    d.set_item("t", trace.steps.iter().map(|s| s.state.time).collect::<Vec<_>>())?;
    d.set_item("potential", trace.steps.iter().map(|s| s.potential).collect::<Vec<_>>())?;
    d.set_item("tracking_error", trace.tracking_error())?;
    d.set_item("endpoint_error", trace.endpoint_error())?;
    Ok(d)
}

#[pymodule]
fn bimorph(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPose>()?;
    m.add_class::<PyDesign>()?;
    m.add_class::<PyCloud>()?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(compare_dexterity, m)?)?;
    m.add_function(wrap_pyfunction!(transition, m)?)?;
    Ok(())
}
