//! C ABI over the `whichway` library.
//!
//! Every function returns a [`WwmStatus`]; results come back through out
//! pointers. On failure a message is kept per thread and can be copied out
//! with [`wwm_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use whichway::apparatus::{uniform_planes, FIRST_PLANE, LAST_PLANE, PLANE_COUNT};
use whichway::disturbance::{bound, EraserMixture, PairingMode};
use whichway::study::{launch, plane_disturbance, EnsemblePair, KernelSettings};
use whichway::{ApparatusConfig, Error, Scheme, WaveField};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WwmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Node = 4,
    EmptyPixel = 5,
    Detector = 6,
    Reconstruction = 7,
    Numerical = 8,
    Panic = 9,
    BufferTooSmall = 10,
}

impl From<&Error> for WwmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => WwmStatus::InvalidArgument,
            Error::Domain(_) => WwmStatus::Domain,
            Error::Node { .. } | Error::NodeSkip { .. } => WwmStatus::Node,
            Error::EmptyPixel { .. } => WwmStatus::EmptyPixel,
            Error::Detector(_) => WwmStatus::Detector,
            Error::Reconstruction(_) => WwmStatus::Reconstruction,
            Error::Pairing(_)
            | Error::EmptyEnsemble(_)
            | Error::Grid(_)
            | Error::Aliasing(_)
            | Error::Extrema(_)
            | Error::Io(_) => WwmStatus::Numerical,
        }
    }
}

/// Geometry in metres. The plane list is passed separately.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WwmApparatus {
    pub slit_separation: f64,
    pub packet_waist: f64,
    pub wavelength: f64,
}

/// Opaque analytic field for one relative phase.
pub struct WwmField {
    inner: WaveField,
}

/// Opaque pair of phi = 0 and phi = pi trajectory ensembles.
pub struct WwmSimulation {
    inner: EnsemblePair,
    slit_separation: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: WwmStatus, message: impl Into<String>) -> WwmStatus {
    set_error(message);
    status
}

fn guard(body: impl FnOnce() -> Result<(), WwmStatus>) -> WwmStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => WwmStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(WwmStatus::Panic, format!("panic: {text}"))
        }
    }
}

fn lift<T>(r: whichway::Result<T>) -> Result<T, WwmStatus> {
    r.map_err(|e| fail(WwmStatus::from(&e), e.to_string()))
}

unsafe fn out<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, WwmStatus> {
    ptr.as_mut()
        .ok_or_else(|| fail(WwmStatus::NullPointer, format!("{name} is null")))
}

unsafe fn input<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, WwmStatus> {
    ptr.as_ref()
        .ok_or_else(|| fail(WwmStatus::NullPointer, format!("{name} is null")))
}

/// Planes from a caller array, or the 117 reference planes when `planes` is
/// null and `n_planes` is zero.
unsafe fn planes(planes: *const f64, n_planes: usize) -> Result<Vec<f64>, WwmStatus> {
    if planes.is_null() {
        if n_planes == 0 {
            return Ok(uniform_planes(FIRST_PLANE, LAST_PLANE, PLANE_COUNT));
        }
        return Err(fail(WwmStatus::NullPointer, "planes is null"));
    }
    Ok(std::slice::from_raw_parts(planes, n_planes).to_vec())
}

unsafe fn config(apparatus: *const WwmApparatus, p: *const f64, n: usize) -> Result<ApparatusConfig, WwmStatus> {
    let a = input(apparatus, "apparatus")?;
    lift(ApparatusConfig::new(
        a.slit_separation,
        a.packet_waist,
        a.wavelength,
        planes(p, n)?,
    ))
}

/// Copies the calling thread's last error message into `buffer`, NUL
/// terminated. `needed` receives the size including the terminator; it is
/// 1 when there is no message.
///
/// # Safety
/// `buffer` must point to `capacity` writable bytes or be null with
/// `capacity == 0`; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn wwm_last_error_message(buffer: *mut c_char, capacity: usize, needed: *mut usize) -> WwmStatus {
    let message = LAST_ERROR.with(|e| e.borrow().clone()).unwrap_or_default();
    let bytes = message.as_bytes_with_nul();
    if let Some(n) = needed.as_mut() {
        *n = bytes.len();
    }
    if capacity < bytes.len() || buffer.is_null() {
        return WwmStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buffer, bytes.len());
    WwmStatus::Ok
}

/// # Safety
/// `out_apparatus` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wwm_apparatus_reference(out_apparatus: *mut WwmApparatus) -> WwmStatus {
    guard(|| {
        let r = ApparatusConfig::reference();
        *out(out_apparatus, "out_apparatus")? = WwmApparatus {
            slit_separation: r.slit_separation(),
            packet_waist: r.packet_waist(),
            wavelength: r.wavelength(),
        };
        Ok(())
    })
}

/// Lower bound `(2/pi)(1 - V)` on the mean absolute disturbance [hbar/d].
///
/// # Safety
/// `out_bound` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wwm_bound(visibility: f64, out_bound: *mut f64) -> WwmStatus {
    guard(|| {
        let slot = out(out_bound, "out_bound")?;
        *slot = lift(bound(visibility))?;
        Ok(())
    })
}

/// Weak momentum estimate [hbar/d] from circular-polarisation counts.
///
/// # Safety
/// `apparatus` and `out_momentum` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wwm_invert_counts(
    right: f64,
    left: f64,
    coupling: f64,
    apparatus: *const WwmApparatus,
    out_momentum: *mut f64,
) -> WwmStatus {
    guard(|| {
        let c = config(apparatus, std::ptr::null(), 0)?;
        let slot = out(out_momentum, "out_momentum")?;
        if !(coupling.is_finite() && coupling > 0.0) {
            return Err(fail(WwmStatus::InvalidArgument, "coupling must be positive"));
        }
        *slot = lift(whichway::detector::invert_counts(right, left, coupling, &c))?;
        Ok(())
    })
}

/// Creates the analytic field for relative phase `phase`. `planes` may be
/// null with `n_planes == 0` for the reference plane list.
///
/// # Safety
/// `apparatus` must be valid, `planes` must hold `n_planes` values, and
/// `out_field` must be a valid pointer. Free the handle with
/// [`wwm_field_free`].
#[no_mangle]
pub unsafe extern "C" fn wwm_field_new(
    apparatus: *const WwmApparatus,
    planes: *const f64,
    n_planes: usize,
    phase: f64,
    out_field: *mut *mut WwmField,
) -> WwmStatus {
    guard(|| {
        let slot = out(out_field, "out_field")?;
        *slot = std::ptr::null_mut();
        let c = config(apparatus, planes, n_planes)?;
        let inner = lift(WaveField::new(c, phase))?;
        *slot = Box::into_raw(Box::new(WwmField { inner }));
        Ok(())
    })
}

/// # Safety
/// `field` must come from [`wwm_field_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wwm_field_free(field: *mut WwmField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Probability density [1/m] at `(x, z)` in metres.
///
/// # Safety
/// `field` and `out_intensity` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wwm_field_intensity(
    field: *const WwmField,
    x: f64,
    z: f64,
    out_intensity: *mut f64,
) -> WwmStatus {
    guard(|| {
        let f = input(field, "field")?;
        let slot = out(out_intensity, "out_intensity")?;
        *slot = lift(f.inner.intensity(x, z))?;
        Ok(())
    })
}

/// Transverse momentum [hbar/d] and velocity ratio v/c at `(x, z)`.
///
/// # Safety
/// `field` must be valid; either out pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn wwm_field_momentum(
    field: *const WwmField,
    x: f64,
    z: f64,
    out_momentum: *mut f64,
    out_velocity_ratio: *mut f64,
) -> WwmStatus {
    guard(|| {
        let f = input(field, "field")?;
        let s = lift(f.inner.momentum(x, z))?;
        if let Some(p) = out_momentum.as_mut() {
            *p = s.p;
        }
        if let Some(v) = out_velocity_ratio.as_mut() {
            *v = s.v_over_c;
        }
        Ok(())
    })
}

/// Seeds `n_per_slit` trajectories per slit and integrates both phases.
/// `substeps == 0` selects the plane-to-plane Euler scheme, otherwise RK4
/// with that many substeps per interval.
///
/// # Safety
/// As for [`wwm_field_new`]; free with [`wwm_simulation_free`].
#[no_mangle]
pub unsafe extern "C" fn wwm_simulation_new(
    apparatus: *const WwmApparatus,
    planes: *const f64,
    n_planes: usize,
    n_per_slit: usize,
    substeps: u32,
    out_simulation: *mut *mut WwmSimulation,
) -> WwmStatus {
    guard(|| {
        let slot = out(out_simulation, "out_simulation")?;
        *slot = std::ptr::null_mut();
        let c = config(apparatus, planes, n_planes)?;
        let scheme = match substeps {
            0 => Scheme::PaperEuler,
            k => Scheme::Refined(k),
        };
        let inner = lift(launch(&c, n_per_slit, scheme))?;
        *slot = Box::into_raw(Box::new(WwmSimulation {
            inner,
            slit_separation: c.slit_separation(),
        }));
        Ok(())
    })
}

/// # Safety
/// `simulation` must come from [`wwm_simulation_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn wwm_simulation_free(simulation: *mut WwmSimulation) {
    if !simulation.is_null() {
        drop(Box::from_raw(simulation));
    }
}

/// Number of trajectories per phase and number of planes.
///
/// # Safety
/// `simulation` must be valid; either out pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn wwm_simulation_shape(
    simulation: *const WwmSimulation,
    out_trajectories: *mut usize,
    out_planes: *mut usize,
) -> WwmStatus {
    guard(|| {
        let s = input(simulation, "simulation")?;
        if let Some(n) = out_trajectories.as_mut() {
            *n = s.inner.zero.len();
        }
        if let Some(n) = out_planes.as_mut() {
            *n = s.inner.planes().len();
        }
        Ok(())
    })
}

/// Position [m] of trajectory `index` on plane `plane`; `disturbed` selects
/// the phi = pi ensemble. NaN after a trajectory stopped at a node.
///
/// # Safety
/// `simulation` and `out_position` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wwm_simulation_position(
    simulation: *const WwmSimulation,
    disturbed: bool,
    index: usize,
    plane: usize,
    out_position: *mut f64,
) -> WwmStatus {
    guard(|| {
        let s = input(simulation, "simulation")?;
        let slot = out(out_position, "out_position")?;
        let e = if disturbed { &s.inner.pi } else { &s.inner.zero };
        if index >= e.len() || plane >= e.planes().len() {
            return Err(fail(
                WwmStatus::InvalidArgument,
                format!("trajectory {index} / plane {plane} out of range"),
            ));
        }
        *slot = e.position(index, plane);
        Ok(())
    })
}

/// Mean absolute momentum disturbance [hbar/d] of the `eta0` mixture on
/// `plane`, smoothed with a Gaussian of width `sigma` [hbar/d] using paired
/// trajectories.
///
/// # Safety
/// `simulation` and `out_mean_abs` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wwm_simulation_mean_abs(
    simulation: *const WwmSimulation,
    plane: usize,
    eta0: f64,
    sigma: f64,
    out_mean_abs: *mut f64,
) -> WwmStatus {
    guard(|| {
        let s = input(simulation, "simulation")?;
        let slot = out(out_mean_abs, "out_mean_abs")?;
        if plane >= s.inner.planes().len() {
            return Err(fail(WwmStatus::InvalidArgument, format!("plane {plane} out of range")));
        }
        let kernel = KernelSettings {
            sigma,
            spacing: (sigma / 10.0).min(whichway::disturbance::DEFAULT_GRID_SPACING),
            pairing: PairingMode::PairedTrajectory,
        };
        let mixture = lift(EraserMixture::new(eta0))?;
        let d = lift(plane_disturbance(&s.inner, plane, &kernel, None))?;
        *slot = lift(d.mean_abs(mixture))?;
        Ok(())
    })
}

/// Slit separation [m] the simulation was built with.
///
/// # Safety
/// `simulation` and `out_separation` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wwm_simulation_slit_separation(
    simulation: *const WwmSimulation,
    out_separation: *mut f64,
) -> WwmStatus {
    guard(|| {
        let s = input(simulation, "simulation")?;
        *out(out_separation, "out_separation")? = s.slit_separation;
        Ok(())
    })
}
