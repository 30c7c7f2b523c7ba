use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use walrec_core::gramian::{self, assemble_gramian_at, mu_of, walsh_integrals, SsrOutcome};
use walrec_core::pgm::{encode_p5, magnitude_image};
use walrec_core::recon::{
    generalized_sampling, generalized_sampling_2d, pbdw, sample_signal, synthesize_coeffs,
    SampleVector,
};
use walrec_core::signals;
use walrec_core::walsh::{fwht_sequency, wal_eval, DyadicPoint};
use walrec_core::wavelet::{enumerate_basis, render_haar_id, OrthoBasis};
use walrec_core::{
    truncation_error, BasisSpec, Family, FineGridFunction, Representation, SamplingFamily,
    SamplingSpec, TestSignal, TruncationBasis,
};

use crate::emit::{fmt, Csv, OutDir};
use crate::Flags;

pub type CmdResult<T> = Result<T, String>;

fn core<T>(r: walrec_core::Result<T>) -> CmdResult<T> {
    r.map_err(|e| e.to_string())
}

fn io<T>(r: std::io::Result<T>) -> CmdResult<T> {
    r.map_err(|e| format!("io: {e}"))
}

fn sampling_family(f: &Flags) -> CmdResult<SamplingFamily> {
    match &f.sampling {
        Some(s) => core(SamplingFamily::parse(s)),
        None => Ok(SamplingFamily::Walsh),
    }
}

fn wavelet_family(f: &Flags) -> CmdResult<Family> {
    match &f.wavelet {
        Some(s) => core(Family::parse(s)),
        None => Ok(Family::Haar),
    }
}

fn grid_depth(f: &Flags) -> u32 {
    f.depth.unwrap_or(if f.dim == 1 { 12 } else { 8 })
}

fn out_dir(f: &Flags) -> CmdResult<(OutDir, PathBuf)> {
    let dir = f.out.clone().ok_or("--out is required for this subcommand")?;
    Ok((io(OutDir::new(&dir))?, dir))
}

/// Stable-sampling-rate sweep: one row per level from the family's smallest
/// admissible one up to --level.
pub fn ssr(f: &Flags) -> CmdResult<()> {
    let family = sampling_family(f)?;
    let wavelet = wavelet_family(f)?;
    let start = wavelet.min_level().max(1);
    if f.level < start {
        return Err(format!(
            "--level {} is below the smallest {} level {start}",
            f.level,
            wavelet.name()
        ));
    }
    let (mut out, _) = out_dir(f)?;
    let mut csv = Csv::new(f.seed, "N,Theta,mu");
    for r in start..=f.level {
        let spec = core(BasisSpec::new(wavelet, f.dim, r))?;
        let cap_axis = f.mmax.unwrap_or(4usize << r);
        let cap = cap_axis.pow(f.dim);
        match core(gramian::ssr(f.theta, family, &spec, cap))? {
            SsrOutcome::Reached { m, mu } => {
                csv.row(&[spec.n().to_string(), m.to_string(), fmt(mu)]);
            }
            SsrOutcome::NotReached => {
                return Err(format!(
                    "ssr at N={} exhausted the sample budget {cap} without reaching theta={}",
                    spec.n(),
                    f.theta
                ));
            }
        }
    }
    io(out.stage("ssr.csv", &csv.bytes()))?;
    io(out.commit())
}

/// Cross-Gramian dump: entries as CSV plus the magnitude pattern as PGM.
/// Haar uses the wavelet ordering so the block-diagonal structure shows.
pub fn gramian(f: &Flags) -> CmdResult<()> {
    let family = sampling_family(f)?;
    let wavelet = wavelet_family(f)?;
    let spec = core(BasisSpec::new(wavelet, f.dim, f.level))?;
    let m_axis = f.mmax.unwrap_or(spec.n_per_axis());
    if m_axis == 0 {
        return Err("--mmax must be positive for gramian".into());
    }
    let sampling = core(SamplingSpec::new(family, f.dim, m_axis))?;
    let rep = if wavelet == Family::Haar {
        Representation::WaveletOrdered
    } else {
        Representation::Scaling
    };
    let g = core(assemble_gramian_at(&sampling, &spec, rep, grid_depth(f)))?;
    let report = core(mu_of(&g))?;

    let (m, n) = (g.m(), g.n());
    let mut csv = Csv::new(f.seed, "row,col,real,imag");
    let mut mags = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let z = g.entries.at(i, j);
            mags[i * n + j] = z.norm();
            csv.row(&[i.to_string(), j.to_string(), fmt(z.re), fmt(z.im)]);
        }
    }
    csv.comment(&format!("sigma_min={}", fmt(report.sigma_min)));
    csv.comment(&format!("mu={}", fmt(report.mu)));

    let (mut out, _) = out_dir(f)?;
    io(out.stage("gramian.csv", &csv.bytes()))?;
    io(out.stage("gramian.pgm", &encode_p5(&core(magnitude_image(&mags, n, m))?)))?;
    io(out.commit())
}

/// The built-in scene each (dim, sampling family) experiment reconstructs.
fn scene(dim: u32, family: SamplingFamily) -> TestSignal {
    match (dim, family) {
        (1, SamplingFamily::Fourier) => signals::builtin_haar_wavelet(),
        (1, SamplingFamily::Walsh) => signals::builtin_poly_jumps(),
        _ => signals::builtin_bump_inset(),
    }
}

struct MethodOut {
    name: &'static str,
    grid: FineGridFunction,
    l2_error: f64,
    consistency: f64,
}

fn method_out(
    name: &'static str,
    grid: FineGridFunction,
    f: &FineGridFunction,
    b: &SampleVector,
) -> CmdResult<MethodOut> {
    let diff = FineGridFunction::new(
        f.d,
        f.q,
        f.values.iter().zip(&grid.values).map(|(a, b)| a - b).collect(),
    );
    let l2_error = core(diff)?.norm();
    let rb = core(sample_signal(&grid, &b.spec))?;
    let consistency = (0..b.len())
        .map(|i| (rb.values.at(i) - b.values.at(i)).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(MethodOut { name, grid, l2_error, consistency })
}

fn real_grid(d: u32, q: u32, values: Vec<Complex64>) -> CmdResult<FineGridFunction> {
    core(FineGridFunction::new(d, q, values.into_iter().map(|z| z.re).collect()))
}

/// Truncated transform, generalized sampling, and the consistent PBDW
/// correction on the scene picked by (--dim, --sampling), side by side.
pub fn reconstruct(f: &Flags) -> CmdResult<()> {
    let family = sampling_family(f)?;
    let wavelet = wavelet_family(f)?;
    let q = grid_depth(f);
    let fgrid = core(scene(f.dim, family).render(q))?;
    let m_axis = f.mmax.unwrap_or(2usize << f.level);
    let (mut out, _) = out_dir(f)?;

    let methods: Vec<MethodOut> = if m_axis == 0 {
        // No measurements: every output and every error column is zero.
        ["truncated", "gs", "pbdw"]
            .into_iter()
            .map(|name| MethodOut {
                name,
                grid: FineGridFunction::zero(f.dim, q),
                l2_error: 0.0,
                consistency: 0.0,
            })
            .collect()
    } else {
        let sampling = core(SamplingSpec::new(family, f.dim, m_axis))?;
        let b = core(sample_signal(&fgrid, &sampling))?;
        // One-axis Gramian either way; the 2D solvers take it per axis.
        let rspec = core(BasisSpec::new(wavelet, 1, f.level))?;
        let sspec = core(SamplingSpec::new(family, 1, m_axis))?;
        let g = core(assemble_gramian_at(&sspec, &rspec, Representation::Scaling, q))?;

        let gs_res = match f.dim {
            1 => core(generalized_sampling(&g, &b))?,
            _ => core(generalized_sampling_2d(&g, &b))?,
        };
        let gs_grid = real_grid(
            f.dim,
            q,
            core(synthesize_coeffs(wavelet, f.level, f.dim, q, &gs_res.coeffs))?,
        )?;
        let pb = core(pbdw(&g, &b, q))?;
        let pb_grid = pb.fine.expect("pbdw always fills the fine grid");

        let basis = core(OrthoBasis::new(wavelet, f.level, q))?;
        let trunc = match f.dim {
            1 => core(basis.project(&fgrid))?,
            _ => core(basis.project_2d(&fgrid))?,
        };

        vec![
            method_out("truncated", trunc, &fgrid, &b)?,
            method_out("gs", gs_grid, &fgrid, &b)?,
            method_out("pbdw", pb_grid, &fgrid, &b)?,
        ]
    };

    if f.dim == 1 {
        let mut csv = Csv::new(f.seed, "x,signal,truncated,gs,pbdw");
        let cells = 1usize << q;
        for j in 0..cells {
            let x = (j as f64 + 0.5) / cells as f64;
            csv.row(&[
                fmt(x),
                fmt(fgrid.values[j]),
                fmt(methods[0].grid.values[j]),
                fmt(methods[1].grid.values[j]),
                fmt(methods[2].grid.values[j]),
            ]);
        }
        io(out.stage("reconstruction.csv", &csv.bytes()))?;
    } else {
        let side = 1usize << q;
        io(out.stage(
            "signal.pgm",
            &encode_p5(&core(magnitude_image(&fgrid.values, side, side))?),
        ))?;
        for m in &methods {
            io(out.stage(
                &format!("{}.pgm", m.name),
                &encode_p5(&core(magnitude_image(&m.grid.values, side, side))?),
            ))?;
        }
    }

    let mut errors = Csv::new(f.seed, "method,l2_error,consistency");
    for m in &methods {
        errors.row(&[m.name.to_string(), fmt(m.l2_error), fmt(m.consistency)]);
    }
    io(out.stage("errors.csv", &errors.bytes()))?;
    io(out.commit())
}

/// Truncation-decay table for the basis named by exactly one of
/// --sampling walsh or --wavelet.
pub fn approx_rate(f: &Flags) -> CmdResult<()> {
    let basis = match (&f.sampling, &f.wavelet) {
        (Some(s), None) => match core(SamplingFamily::parse(s))? {
            SamplingFamily::Walsh => TruncationBasis::Walsh,
            SamplingFamily::Fourier => {
                return Err("approx-rate tabulates walsh or wavelet truncation, not fourier".into())
            }
        },
        (None, Some(w)) => TruncationBasis::Wavelet(core(Family::parse(w))?),
        _ => return Err("approx-rate wants exactly one of --sampling walsh or --wavelet".into()),
    };
    let signal = match (f.dim, &basis) {
        (1, TruncationBasis::Walsh) => signals::builtin_smooth(),
        (1, TruncationBasis::Wavelet(_)) => signals::builtin_power_kink(),
        _ => signals::builtin_bump_inset(),
    };
    let start = match basis {
        TruncationBasis::Wavelet(fam) => fam.min_level().max(1),
        TruncationBasis::Walsh => 1,
    };
    if f.level < start {
        return Err(format!("--level {} is below the smallest table level {start}", f.level));
    }
    let sizes: Vec<usize> = (start..=f.level).map(|r| 1usize << (r * f.dim)).collect();
    let report = core(truncation_error(&signal, basis, &sizes, grid_depth(f)))?;

    let mut csv = Csv::new(f.seed, "N,epsilon");
    for (n, e) in &report.table {
        csv.row(&[n.to_string(), fmt(*e)]);
    }
    csv.comment(&format!("slope={}", fmt(report.slope)));
    csv.comment(&format!("fit_residual={}", fmt(report.fit_residual)));
    let (mut out, _) = out_dir(f)?;
    io(out.stage("decay.csv", &csv.bytes()))?;
    io(out.commit())
}

/// Dense sequency-ordered Walsh transform straight from the definition.
fn naive_walsh_transform(v: &[f64]) -> CmdResult<Vec<f64>> {
    let len = v.len();
    let k = len.trailing_zeros();
    let scale = 1.0 / (len as f64).sqrt();
    let mut out = vec![0.0; len];
    for (n, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &val) in v.iter().enumerate() {
            let x = core(DyadicPoint::from_grid_index(j as u64, k))?;
            acc += val * core(wal_eval(n as u64, x))? as f64;
        }
        *slot = acc * scale;
    }
    Ok(out)
}

fn check(cond: bool, what: &str) -> CmdResult<()> {
    if cond {
        Ok(())
    } else {
        Err(format!("selftest failed: {what}"))
    }
}

/// Built-in identity suites: the fast transform against the dense definition,
/// the Walsh function identities, and the closed-form Haar-Walsh inner
/// products against grid quadrature.
pub fn selftest(f: &Flags) -> CmdResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(f.seed);

    for k in 1..=9u32 {
        let len = 1usize << k;
        let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut fast = v.clone();
        core(fwht_sequency(&mut fast))?;
        let slow = naive_walsh_transform(&v)?;
        for (n, (a, b)) in fast.iter().zip(&slow).enumerate() {
            check((a - b).abs() < 1e-12, &format!("fwht disagrees at length {len}, entry {n}"))?;
        }
    }
    println!("selftest: fast transform matches the dense definition up to length 512");

    let k = 10u32;
    let cells = 1usize << k;
    // Row sums: Wal(0,.) integrates to 1, every other sequency to 0. With the
    // product identity Wal(n,x)Wal(m,x) = Wal(n xor m, x) this is exactly
    // orthonormality of the family.
    for n in 0..cells as u64 {
        let sum: i64 = (0..cells as u64)
            .map(|j| core(wal_eval(n, DyadicPoint::from_grid_index(j, k).unwrap())).unwrap() as i64)
            .sum();
        let expect = if n == 0 { cells as i64 } else { 0 };
        check(sum == expect, &format!("mean of sequency {n} is {sum}"))?;
    }
    for _ in 0..2000 {
        let n = rng.gen_range(0..512u64);
        let m = rng.gen_range(0..512u64);
        let j = rng.gen_range(0..cells as u64);
        let x = core(DyadicPoint::from_grid_index(j, k))?;
        let lhs = core(wal_eval(n, x))? * core(wal_eval(m, x))?;
        let rhs = core(wal_eval(n ^ m, x))?;
        check(lhs == rhs, &format!("product identity fails at n={n}, m={m}, j={j}"))?;
    }
    for n in 0..512u64 {
        let signs: Vec<i32> = (0..cells as u64)
            .map(|j| core(wal_eval(n, DyadicPoint::from_grid_index(j, k).unwrap())).unwrap())
            .collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count() as u64;
        check(changes == n, &format!("sequency {n} shows {changes} sign changes"))?;
    }
    println!("selftest: walsh identities hold for sequencies below 512");

    // Closed-form inner products against quadrature on the rendered basis.
    for r in 1..=5u32 {
        let q = r + 2;
        let spec = core(BasisSpec::new(Family::Haar, 1, r))?;
        let ids = core(enumerate_basis(&spec, Representation::WaveletOrdered))?;
        for id in &ids {
            let rendered = core(render_haar_id(id, 1, q))?;
            let quad = core(walsh_integrals(&rendered.values))?;
            for (n, &want) in quad.iter().enumerate() {
                let got =
                    core(gramian::haar_walsh_entry(id.kind, id.level, &id.j, &[n as u64]))?;
                check(
                    (got - want).abs() < 1e-12,
                    &format!("closed form disagrees with quadrature at r={r}, n={n}"),
                )?;
            }
        }
    }
    println!("selftest: closed-form inner products match quadrature up to level 5");
    println!("selftest: all checks passed");
    Ok(())
}
