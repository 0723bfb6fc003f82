//! Dormand–Prince 8(5,3) with 7th-order dense output.
//!
//! Works on flat `f64` slices so that the same stepper drives plain states
//! and flattened jet states. Error control is componentwise,
//! `sc_i = atol + rtol * max(|y_i|, |y_new_i|)`.

#![allow(clippy::excessive_precision)]

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step magnitude.
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("right-hand side failed at t = {t}: {message}")]
    Rhs { t: f64, message: String },
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t_old: f64,
    pub h: f64,
    cont: [Vec<f64>; 8],
}

impl DenseSegment {
    pub fn t_new(&self) -> f64 {
        self.t_old + self.h
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t_old) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        for i in 0..out.len() {
            let conpar = c[4][i] + (c[5][i] + (c[6][i] + c[7][i] * s) * s1) * s;
            out[i] = c[0][i] + (c[1][i] + (c[2][i] + (c[3][i] + conpar * s1) * s) * s1) * s;
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.cont[0].len()];
        self.eval_into(t, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// When `observer` is given, every accepted step is handed over with its
/// dense output (three extra evaluations per step).
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    tol: &Tolerances,
    mut observer: Option<&mut dyn FnMut(&DenseSegment)>,
) -> Result<(Vec<f64>, Stats), IntegrationError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), String>,
{
    let n = y0.len();
    let mut stats = Stats::default();
    let mut y = y0.to_vec();
    if t1 == t0 || n == 0 {
        return Ok((y, stats));
    }
    let dir = (t1 - t0).signum();
    let mut call = |t: f64, y: &[f64], dy: &mut [f64], stats: &mut Stats| -> Result<(), IntegrationError> {
        stats.evals += 1;
        f(t, y, dy).map_err(|message| IntegrationError::Rhs { t, message })
    };

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 16];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut t = t0;
    call(t, &y, &mut k[0], &mut stats)?;
    if !k[0].iter().all(|v| v.is_finite()) {
        return Err(IntegrationError::NonFinite { t });
    }
    let mut h = initial_step(&mut call, t, &y, &k[0], dir, tol, &mut stats)?;
    let mut last_rejected = false;
    let (safe, facc1, facc2, expo1): (f64, f64, f64, f64) = (0.9, 1.0 / 0.333, 1.0 / 6.0, 1.0 / 8.0);

    loop {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(IntegrationError::TooManySteps { t });
        }
        let remaining = t1 - t;
        let mut last = false;
        if (h.abs() >= remaining.abs()) || (remaining.abs() - h.abs()).abs() <= 1e-14 * t1.abs().max(1.0) {
            h = remaining;
            last = true;
        }
        if h.abs() <= 10.0 * f64::EPSILON * t.abs().max(1e-300) || h == 0.0 {
            return Err(IntegrationError::StepSizeUnderflow { t });
        }

        // Stages 2..12.
        for (s, row) in STAGES.iter().enumerate() {
            let s = s + 1;
            for i in 0..n {
                let mut acc = 0.0;
                for &(j, a) in row.iter() {
                    acc += a * k[j][i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            let (_, tail) = k.split_at_mut(s);
            call(t + C[s] * h, &ytmp, &mut tail[0], &mut stats)?;
        }
        for i in 0..n {
            let mut acc = 0.0;
            for &(j, b) in SOLUTION.iter() {
                acc += b * k[j][i];
            }
            ytmp[i] = acc;
            ynew[i] = y[i] + h * acc;
        }

        let finite = ynew.iter().all(|v| v.is_finite());
        let mut err = 0.0;
        let mut err2 = 0.0;
        if finite {
            for i in 0..n {
                let sk = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
                let e2 = ytmp[i] - BHH1 * k[0][i] - BHH2 * k[8][i] - BHH3 * k[11][i];
                err2 += (e2 / sk).powi(2);
                let mut e = 0.0;
                for &(j, c) in ERROR.iter() {
                    e += c * k[j][i];
                }
                err += (e / sk).powi(2);
            }
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = if finite {
            h.abs() * err * (1.0 / (deno * n as f64)).sqrt()
        } else {
            f64::INFINITY
        };

        if !err.is_finite() {
            // Treat overflow like a hard rejection.
            stats.rejected += 1;
            last_rejected = true;
            h *= 0.1;
            continue;
        }

        let fac11 = err.powf(expo1);
        let fac = facc2.max(facc1.min(fac11 / safe));
        let mut h_new = h / fac;

        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = t + h;
            call(t_new, &ynew, &mut k[12], &mut stats)?;
            if let Some(obs) = observer.as_deref_mut() {
                let seg = dense_segment(&mut call, t, h, &y, &ynew, &mut k, &mut ytmp, &mut stats)?;
                obs(&seg);
            }
            let (first, rest) = k.split_at_mut(12);
            first[0].copy_from_slice(&rest[0]);
            y.copy_from_slice(&ynew);
            t = if last { t1 } else { t_new };
            if last {
                return Ok((y, stats));
            }
            if last_rejected {
                h_new = dir * h_new.abs().min(h.abs());
            }
            last_rejected = false;
        } else {
            h_new = h / facc1.min(fac11 / safe);
            stats.rejected += 1;
            last_rejected = true;
        }
        h = dir * h_new.abs().min(tol.max_step);
    }
}

fn initial_step<G>(
    call: &mut G,
    t: f64,
    y: &[f64],
    f0: &[f64],
    dir: f64,
    tol: &Tolerances,
    stats: &mut Stats,
) -> Result<f64, IntegrationError>
where
    G: FnMut(f64, &[f64], &mut [f64], &mut Stats) -> Result<(), IntegrationError>,
{
    let n = y.len();
    let sk: Vec<f64> = y.iter().map(|v| tol.atol + tol.rtol * v.abs()).collect();
    let dnf: f64 = f0.iter().zip(&sk).map(|(f, s)| (f / s).powi(2)).sum();
    let dny: f64 = y.iter().zip(&sk).map(|(v, s)| (v / s).powi(2)).sum();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(tol.max_step) * dir;
    let y1: Vec<f64> = y.iter().zip(f0).map(|(v, f)| v + h * f).collect();
    let mut f1 = vec![0.0; n];
    call(t + h, &y1, &mut f1, stats)?;
    let der2 = f1
        .iter()
        .zip(f0)
        .zip(&sk)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        .sqrt()
        / h.abs();
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h.abs() * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    let h = (100.0 * h.abs()).min(h1).min(tol.max_step);
    Ok(dir * h)
}

#[allow(clippy::too_many_arguments)]
fn dense_segment<G>(
    call: &mut G,
    t_old: f64,
    h: f64,
    y_old: &[f64],
    y_new: &[f64],
    k: &mut [Vec<f64>],
    ytmp: &mut [f64],
    stats: &mut Stats,
) -> Result<DenseSegment, IntegrationError>
where
    G: FnMut(f64, &[f64], &mut [f64], &mut Stats) -> Result<(), IntegrationError>,
{
    let n = y_old.len();
    for (s, (c, row)) in EXTRA.iter().enumerate() {
        let idx = 13 + s;
        for i in 0..n {
            let mut acc = 0.0;
            for &(j, a) in row.iter() {
                acc += a * k[j][i];
            }
            ytmp[i] = y_old[i] + h * acc;
        }
        let (_, tail) = k.split_at_mut(idx);
        call(t_old + c * h, ytmp, &mut tail[0], stats)?;
    }
    let mut cont: [Vec<f64>; 8] = Default::default();
    for c in cont.iter_mut() {
        c.resize(n, 0.0);
    }
    for i in 0..n {
        let ydiff = y_new[i] - y_old[i];
        let bspl = h * k[0][i] - ydiff;
        cont[0][i] = y_old[i];
        cont[1][i] = ydiff;
        cont[2][i] = bspl;
        cont[3][i] = ydiff - h * k[12][i] - bspl;
        for (row, d) in DENSE.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, c) in d.iter() {
                acc += c * k[j][i];
            }
            cont[4 + row][i] = h * acc;
        }
    }
    Ok(DenseSegment { t_old, h, cont })
}

// Stage indices are zero based: k[0] = k1, ..., k[11] = k12 (at t + h),
// k[12] = f(t + h, y_new), k[13..16] the dense-output stages.
const C: [f64; 12] = [0.0, C2, C3, C4, C5, C6, C7, C8, C9, C10, C11, 1.0];

const STAGES: [&[(usize, f64)]; 11] = [
    &[(0, A21)],
    &[(0, A31), (1, A32)],
    &[(0, A41), (2, A43)],
    &[(0, A51), (2, A53), (3, A54)],
    &[(0, A61), (3, A64), (4, A65)],
    &[(0, A71), (3, A74), (4, A75), (5, A76)],
    &[(0, A81), (3, A84), (4, A85), (5, A86), (6, A87)],
    &[(0, A91), (3, A94), (4, A95), (5, A96), (6, A97), (7, A98)],
    &[(0, A101), (3, A104), (4, A105), (5, A106), (6, A107), (7, A108), (8, A109)],
    &[(0, A111), (3, A114), (4, A115), (5, A116), (6, A117), (7, A118), (8, A119), (9, A1110)],
    &[(0, A121), (3, A124), (4, A125), (5, A126), (6, A127), (7, A128), (8, A129), (9, A1210), (10, A1211)],
];

const SOLUTION: [(usize, f64); 8] = [(0, B1), (5, B6), (6, B7), (7, B8), (8, B9), (9, B10), (10, B11), (11, B12)];

const ERROR: [(usize, f64); 8] = [(0, ER1), (5, ER6), (6, ER7), (7, ER8), (8, ER9), (9, ER10), (10, ER11), (11, ER12)];

const EXTRA: [(f64, &[(usize, f64)]); 3] = [
    (C14, &[(0, A141), (6, A147), (7, A148), (8, A149), (9, A1410), (10, A1411), (11, A1412), (12, A1413)]),
    (C15, &[(0, A151), (5, A156), (6, A157), (7, A158), (10, A1511), (11, A1512), (12, A1513), (13, A1514)]),
    (C16, &[(0, A161), (5, A166), (6, A167), (7, A168), (8, A169), (12, A1613), (13, A1614), (14, A1615)]),
];

const DENSE: [[(usize, f64); 12]; 4] = [
    [(0, D41), (5, D46), (6, D47), (7, D48), (8, D49), (9, D410), (10, D411), (11, D412), (12, D413), (13, D414), (14, D415), (15, D416)],
    [(0, D51), (5, D56), (6, D57), (7, D58), (8, D59), (9, D510), (10, D511), (11, D512), (12, D513), (13, D514), (14, D515), (15, D516)],
    [(0, D61), (5, D66), (6, D67), (7, D68), (8, D69), (9, D610), (10, D611), (11, D612), (12, D613), (13, D614), (14, D615), (15, D616)],
    [(0, D71), (5, D76), (6, D77), (7, D78), (8, D79), (9, D710), (10, D711), (11, D712), (12, D713), (13, D714), (14, D715), (15, D716)],
];

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;
const A141: f64 = 5.61675022830479523392909219681E-2;
const A147: f64 = 2.53500210216624811088794765333E-1;
const A148: f64 = -2.46239037470802489917441475441E-1;
const A149: f64 = -1.24191423263816360469010140626E-1;
const A1410: f64 = 1.5329179827876569731206322685E-1;
const A1411: f64 = 8.20105229563468988491666602057E-3;
const A1412: f64 = 7.56789766054569976138603589584E-3;
const A1413: f64 = -8.298E-3;
const A151: f64 = 3.18346481635021405060768473261E-2;
const A156: f64 = 2.83009096723667755288322961402E-2;
const A157: f64 = 5.35419883074385676223797384372E-2;
const A158: f64 = -5.49237485713909884646569340306E-2;
const A1511: f64 = -1.08347328697249322858509316994E-4;
const A1512: f64 = 3.82571090835658412954920192323E-4;
const A1513: f64 = -3.40465008687404560802977114492E-4;
const A1514: f64 = 1.41312443674632500278074618366E-1;
const A161: f64 = -4.28896301583791923408573538692E-1;
const A166: f64 = -4.69762141536116384314449447206E0;
const A167: f64 = 7.68342119606259904184240953878E0;
const A168: f64 = 4.06898981839711007970213554331E0;
const A169: f64 = 3.56727187455281109270669543021E-1;
const A1613: f64 = -1.39902416515901462129418009734E-3;
const A1614: f64 = 2.9475147891527723389556272149E0;
const A1615: f64 = -9.15095847217987001081870187138E0;
const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;
const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;
const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;
const C14: f64 = 0.1E+00;
const C15: f64 = 0.2E+00;
const C16: f64 = 0.777777777777777777777777777778E+00;
const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;
const D41: f64 = -0.84289382761090128651353491142E+01;
const D46: f64 = 0.56671495351937776962531783590E+00;
const D47: f64 = -0.30689499459498916912797304727E+01;
const D48: f64 = 0.23846676565120698287728149680E+01;
const D49: f64 = 0.21170345824450282767155149946E+01;
const D410: f64 = -0.87139158377797299206789907490E+00;
const D411: f64 = 0.22404374302607882758541771650E+01;
const D412: f64 = 0.63157877876946881815570249290E+00;
const D413: f64 = -0.88990336451333310820698117400E-01;
const D414: f64 = 0.18148505520854727256656404962E+02;
const D415: f64 = -0.91946323924783554000451984436E+01;
const D416: f64 = -0.44360363875948939664310572000E+01;
const D51: f64 = 0.10427508642579134603413151009E+02;
const D56: f64 = 0.24228349177525818288430175319E+03;
const D57: f64 = 0.16520045171727028198505394887E+03;
const D58: f64 = -0.37454675472269020279518312152E+03;
const D59: f64 = -0.22113666853125306036270938578E+02;
const D510: f64 = 0.77334326684722638389603898808E+01;
const D511: f64 = -0.30674084731089398182061213626E+02;
const D512: f64 = -0.93321305264302278729567221706E+01;
const D513: f64 = 0.15697238121770843886131091075E+02;
const D514: f64 = -0.31139403219565177677282850411E+02;
const D515: f64 = -0.93529243588444783865713862664E+01;
const D516: f64 = 0.35816841486394083752465898540E+02;
const D61: f64 = 0.19985053242002433820987653617E+02;
const D66: f64 = -0.38703730874935176555105901742E+03;
const D67: f64 = -0.18917813819516756882830838328E+03;
const D68: f64 = 0.52780815920542364900561016686E+03;
const D69: f64 = -0.11573902539959630126141871134E+02;
const D610: f64 = 0.68812326946963000169666922661E+01;
const D611: f64 = -0.10006050966910838403183860980E+01;
const D612: f64 = 0.77771377980534432092869265740E+00;
const D613: f64 = -0.27782057523535084065932004339E+01;
const D614: f64 = -0.60196695231264120758267380846E+02;
const D615: f64 = 0.84320405506677161018159903784E+02;
const D616: f64 = 0.11992291136182789328035130030E+02;
const D71: f64 = -0.25693933462703749003312586129E+02;
const D76: f64 = -0.15418974869023643374053993627E+03;
const D77: f64 = -0.23152937917604549567536039109E+03;
const D78: f64 = 0.35763911791061412378285349910E+03;
const D79: f64 = 0.93405324183624310003907691704E+02;
const D710: f64 = -0.37458323136451633156875139351E+02;
const D711: f64 = 0.10409964950896230045147246184E+03;
const D712: f64 = 0.29840293426660503123344363579E+02;
const D713: f64 = -0.43533456590011143754432175058E+02;
const D714: f64 = 0.96324553959188282948394950600E+02;
const D715: f64 = -0.39177261675615439165231486172E+02;
const D716: f64 = -0.14972683625798562581422125276E+03;

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
        dy[0] = -y[0];
        Ok(())
    }

    #[test]
    fn scalar_decay() {
        let (y, _) = integrate(decay, 0.0, &[1.0], 1.0, &Tolerances::default(), None).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn backward_integration() {
        let (y, _) = integrate(decay, 1.0, &[(-1.0f64).exp()], 0.0, &Tolerances::default(), None).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dense_output_matches_exact_solution() {
        let mut worst: f64 = 0.0;
        let mut obs = |seg: &DenseSegment| {
            for j in 0..=10 {
                let t = seg.t_old + seg.h * j as f64 / 10.0;
                let y = seg.eval(t);
                let exact = [t.cos(), -t.sin()];
                worst = worst.max((y[0] - exact[0]).abs()).max((y[1] - exact[1]).abs());
            }
        };
        let osc = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), String> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        let (y, stats) = integrate(osc, 0.0, &[1.0, 0.0], 10.0, &Tolerances::default(), Some(&mut obs)).unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!(worst < 1e-9, "dense output error {worst:e}");
        assert!(stats.accepted > 0);
    }

    #[test]
    fn blow_up_is_reported() {
        let blow = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), String> {
            dy[0] = y[0] * y[0];
            Ok(())
        };
        assert!(integrate(blow, 0.0, &[1.0], 2.0, &Tolerances::default(), None).is_err());
    }
}
