//! Test-only helpers: a MAT-v5 writer, naive reference implementations and
//! a scriptable chat-completions mock.
#![allow(dead_code)]

use std::f64::consts::PI;

pub mod mat {
    use flate2::write::ZlibEncoder;
    use flate2::Compression;
    use std::io::Write;

    const MI_INT8: u32 = 1;
    const MI_INT32: u32 = 5;
    const MI_UINT32: u32 = 6;
    const MI_DOUBLE: u32 = 9;
    const MI_MATRIX: u32 = 14;
    const MI_COMPRESSED: u32 = 15;

    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub enum Order {
        Little,
        Big,
    }

    struct W {
        order: Order,
        buf: Vec<u8>,
    }

    impl W {
        fn u32(&mut self, v: u32) {
            match self.order {
                Order::Little => self.buf.extend(v.to_le_bytes()),
                Order::Big => self.buf.extend(v.to_be_bytes()),
            }
        }
        fn f64(&mut self, v: f64) {
            match self.order {
                Order::Little => self.buf.extend(v.to_le_bytes()),
                Order::Big => self.buf.extend(v.to_be_bytes()),
            }
        }
        fn pad8(&mut self) {
            while !self.buf.len().is_multiple_of(8) {
                self.buf.push(0);
            }
        }
    }

    pub fn header(order: Order) -> Vec<u8> {
        let mut h = b"MATLAB 5.0 MAT-file, test fixture writer".to_vec();
        h.resize(116, b' ');
        h.extend([0u8; 8]);
        match order {
            Order::Little => {
                h.extend(0x0100u16.to_le_bytes());
                h.extend(b"IM");
            }
            Order::Big => {
                h.extend(0x0100u16.to_be_bytes());
                h.extend(b"MI");
            }
        }
        h
    }

    /// A complete miMATRIX element holding an n x 1 double column.
    pub fn matrix_element(order: Order, name: &str, values: &[f64]) -> Vec<u8> {
        let mut body = W { order, buf: Vec::new() };
        body.u32(MI_UINT32);
        body.u32(8);
        body.u32(6); // mxDOUBLE_CLASS, no flags
        body.u32(0);
        body.u32(MI_INT32);
        body.u32(8);
        body.u32(values.len() as u32);
        body.u32(1);
        let name = name.as_bytes();
        if !name.is_empty() && name.len() <= 4 {
            body.u32(((name.len() as u32) << 16) | MI_INT8);
            body.buf.extend(name);
            body.pad8();
        } else {
            body.u32(MI_INT8);
            body.u32(name.len() as u32);
            body.buf.extend(name);
            body.pad8();
        }
        body.u32(MI_DOUBLE);
        body.u32(8 * values.len() as u32);
        for &v in values {
            body.f64(v);
        }
        body.pad8();

        let mut el = W { order, buf: Vec::new() };
        el.u32(MI_MATRIX);
        el.u32(body.buf.len() as u32);
        el.buf.extend(body.buf);
        el.buf
    }

    pub fn write(order: Order, compressed: bool, vars: &[(&str, &[f64])]) -> Vec<u8> {
        let mut out = W {
            order,
            buf: header(order),
        };
        for (name, values) in vars {
            let el = matrix_element(order, name, values);
            if compressed {
                let mut z = ZlibEncoder::new(Vec::new(), Compression::default());
                z.write_all(&el).unwrap();
                let z = z.finish().unwrap();
                out.u32(MI_COMPRESSED);
                out.u32(z.len() as u32);
                out.buf.extend(z);
            } else {
                out.buf.extend(el);
            }
        }
        out.buf
    }
}

/// |X(k)| / L for k = 0..L, summed directly with exact angle reduction.
pub fn naive_dft_scaled(x: &[f64]) -> Vec<f64> {
    let l = x.len();
    (0..l)
        .map(|k| {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (n, &v) in x.iter().enumerate() {
                let a = 2.0 * PI * ((k * n) % l) as f64 / l as f64;
                re += v * a.cos();
                im -= v * a.sin();
            }
            (re * re + im * im).sqrt() / l as f64
        })
        .collect()
}

/// The 15 features, each written straight from its formula.
pub fn naive_features(x: &[f64], fs: f64) -> [f64; 15] {
    let l = x.len() as f64;
    let mu = x.iter().sum::<f64>() / l;
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / l).sqrt();
    let sigma = (x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / l).sqrt();
    let max_abs = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mean_abs = x.iter().map(|v| v.abs()).sum::<f64>() / l;
    let sum_abs = x.iter().map(|v| v.abs()).sum::<f64>();
    let (skew, kurt) = if sigma == 0.0 {
        (0.0, 0.0)
    } else {
        (
            x.iter().map(|v| (v - mu).powi(3)).sum::<f64>() / l / sigma.powi(3),
            x.iter().map(|v| (v - mu).powi(4)).sum::<f64>() / l / sigma.powi(4),
        )
    };
    let (cf, sf, imp) = if mean_abs == 0.0 {
        (0.0, 0.0, 0.0)
    } else {
        (max_abs / rms, rms / mean_abs, max_abs / mean_abs)
    };
    let ef = if sum_abs == 0.0 {
        0.0
    } else {
        x.iter().map(|v| v * v).sum::<f64>() / (sum_abs * sum_abs)
    };
    let p2p = x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);

    // unscaled one-sided magnitudes
    let n = x.len();
    let mags: Vec<f64> = naive_dft_scaled(x)[..n / 2 + 1].iter().map(|m| m * l).collect();
    let c = mags.len() as f64;
    let mut peak = 0;
    for m in 1..mags.len() {
        if mags[m] > mags[peak] {
            peak = m;
        }
    }
    let mx = mags.iter().cloned().fold(f64::MIN, f64::max);
    let mn = mags.iter().cloned().fold(f64::MAX, f64::min);
    let mmu = mags.iter().sum::<f64>() / c;
    let msd = (mags.iter().map(|v| (v - mmu).powi(2)).sum::<f64>() / c).sqrt();
    let (sskew, skurt) = if msd == 0.0 {
        (0.0, 0.0)
    } else {
        (
            mags.iter().map(|v| (v - mmu).powi(3)).sum::<f64>() / c / msd.powi(3),
            mags.iter().map(|v| (v - mmu).powi(4)).sum::<f64>() / c / msd.powi(4),
        )
    };
    let total: f64 = mags.iter().sum();
    let bw = if total == 0.0 {
        0.0
    } else {
        let mu_f = mags.iter().enumerate().map(|(m, v)| m as f64 * v).sum::<f64>() / total;
        (mags
            .iter()
            .enumerate()
            .map(|(m, v)| (m as f64 - mu_f).powi(2) * v)
            .sum::<f64>()
            / total)
            .sqrt()
            * fs
            / l
    };
    [
        mu,
        rms,
        sigma,
        cf,
        skew,
        sf,
        kurt,
        p2p,
        ef,
        imp,
        peak as f64 * fs / l,
        mx - mn,
        skurt,
        bw,
        sskew,
    ]
}

/// Relative comparison with an absolute floor for values near zero.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs.max(rel * a.abs().max(b.abs()))
}

/// floor(y * 10^d) for y >= 0, read off the positional decimal rendering of y.
pub fn decimal_floor(y: f64, d: u32) -> i128 {
    assert!(y >= 0.0 && y.is_finite());
    let s = y.to_string();
    let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
    let mut digits = int.to_string();
    for i in 0..d as usize {
        digits.push(frac.as_bytes().get(i).map_or('0', |&b| b as char));
    }
    digits.parse().unwrap()
}

/// Exact rational a/b kept as (numerator, denominator) in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Q(pub i128, pub i128);

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Q {
    pub fn new(n: i128, d: i128) -> Q {
        if d == 0 {
            return Q(0, 1);
        }
        let g = gcd(n, d).max(1);
        Q(n / g, d / g)
    }
    pub fn add(self, o: Q) -> Q {
        Q::new(self.0 * o.1 + o.0 * self.1, self.1 * o.1)
    }
    pub fn mul(self, o: Q) -> Q {
        Q::new(self.0 * o.0, self.1 * o.1)
    }
    pub fn div(self, o: Q) -> Q {
        if o.0 == 0 {
            Q(0, 1)
        } else {
            Q::new(self.0 * o.1, self.1 * o.0)
        }
    }
    pub fn f64(self) -> f64 {
        self.0 as f64 / self.1 as f64
    }
}

pub struct BruteMetrics {
    /// k x (k+1), last column unmapped.
    pub counts: Vec<Vec<u64>>,
    pub accuracy: Q,
    pub macro_precision: Q,
    pub macro_recall: Q,
    pub macro_f1: Q,
    pub precision: Vec<Q>,
    pub recall: Vec<Q>,
    pub f1: Vec<Q>,
}

/// Metrics by enumerating pairs per class, in exact rationals.
pub fn brute_metrics(k: usize, pairs: &[(usize, Option<usize>)]) -> BruteMetrics {
    let mut counts = vec![vec![0u64; k + 1]; k];
    for &(t, p) in pairs {
        counts[t][p.unwrap_or(k)] += 1;
    }
    let correct = pairs.iter().filter(|(t, p)| Some(*t) == *p).count() as i128;
    let mut precision = vec![];
    let mut recall = vec![];
    let mut f1 = vec![];
    let mut active = vec![];
    for c in 0..k {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == Some(c)).count() as i128;
        let fp = pairs.iter().filter(|&&(t, p)| t != c && p == Some(c)).count() as i128;
        let fne = pairs.iter().filter(|&&(t, p)| t == c && p != Some(c)).count() as i128;
        let p = Q::new(tp, tp + fp);
        let r = Q::new(tp, tp + fne);
        let f = Q::new(2, 1).mul(p).mul(r).div(p.add(r));
        precision.push(p);
        recall.push(r);
        f1.push(f);
        active.push(tp + fp + fne > 0);
    }
    let n_active = active.iter().filter(|a| **a).count() as i128;
    let avg = |v: &[Q]| {
        v.iter()
            .zip(&active)
            .filter(|(_, a)| **a)
            .fold(Q(0, 1), |s, (q, _)| s.add(*q))
            .div(Q(n_active, 1))
    };
    BruteMetrics {
        accuracy: Q::new(correct, pairs.len() as i128),
        macro_precision: avg(&precision),
        macro_recall: avg(&recall),
        macro_f1: avg(&f1),
        counts,
        precision,
        recall,
        f1,
    }
}

pub mod mock {
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
    use std::sync::{Arc, Mutex};
    use std::time::{Duration, Instant};

    use axum::extract::State;
    use axum::http::{HeaderMap, StatusCode};
    use axum::response::{IntoResponse, Response};
    use axum::routing::post;
    use axum::{Json, Router};
    use serde_json::{json, Value};

    pub enum Reply {
        Text(String),
        Status(u16),
        Raw(String),
    }

    pub type Script = dyn Fn(&str, u64) -> (Reply, Duration) + Send + Sync;

    #[derive(Debug, Clone)]
    pub struct Hit {
        pub prompt: String,
        pub start: Instant,
        pub end: Instant,
        pub authorization: Option<String>,
        pub body: Value,
    }

    struct Shared {
        script: Box<Script>,
        calls: AtomicU64,
        in_flight: AtomicUsize,
        max_in_flight: AtomicUsize,
        hits: Mutex<Vec<Hit>>,
    }

    pub struct MockServer {
        pub url: String,
        shared: Arc<Shared>,
    }

    impl MockServer {
        /// `script(prompt, call_number)` decides the reply and its delay.
        pub async fn start(script: impl Fn(&str, u64) -> (Reply, Duration) + Send + Sync + 'static) -> Self {
            let shared = Arc::new(Shared {
                script: Box::new(script),
                calls: AtomicU64::new(0),
                in_flight: AtomicUsize::new(0),
                max_in_flight: AtomicUsize::new(0),
                hits: Mutex::new(Vec::new()),
            });
            let app = Router::new()
                .route("/v1/chat/completions", post(handle))
                .with_state(shared.clone());
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            let addr = listener.local_addr().unwrap();
            tokio::spawn(async move {
                axum::serve(listener, app).await.unwrap();
            });
            MockServer {
                url: format!("http://{addr}"),
                shared,
            }
        }

        /// Answers every prompt with the mapped text (or "???" when unknown).
        pub async fn lookup(answers: HashMap<String, String>) -> Self {
            Self::start(move |p, _| {
                (
                    Reply::Text(answers.get(p).cloned().unwrap_or_else(|| "???".into())),
                    Duration::ZERO,
                )
            })
            .await
        }

        pub fn calls(&self) -> u64 {
            self.shared.calls.load(Ordering::SeqCst)
        }

        pub fn max_in_flight(&self) -> usize {
            self.shared.max_in_flight.load(Ordering::SeqCst)
        }

        pub fn hits(&self) -> Vec<Hit> {
            self.shared.hits.lock().unwrap().clone()
        }
    }

    async fn handle(State(s): State<Arc<Shared>>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
        let start = Instant::now();
        let now = s.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        s.max_in_flight.fetch_max(now, Ordering::SeqCst);
        let call = s.calls.fetch_add(1, Ordering::SeqCst);
        let prompt = body["messages"][0]["content"].as_str().unwrap_or_default().to_string();
        let (reply, delay) = (s.script)(&prompt, call);
        if !delay.is_zero() {
            tokio::time::sleep(delay).await;
        }
        s.in_flight.fetch_sub(1, Ordering::SeqCst);
        s.hits.lock().unwrap().push(Hit {
            prompt,
            start,
            end: Instant::now(),
            authorization: headers
                .get("authorization")
                .and_then(|v| v.to_str().ok())
                .map(str::to_string),
            body,
        });
        match reply {
            Reply::Text(t) => Json(json!({
                "id": "mock",
                "object": "chat.completion",
                "choices": [{"index": 0, "message": {"role": "assistant", "content": t}, "finish_reason": "stop"}]
            }))
            .into_response(),
            Reply::Status(code) => (StatusCode::from_u16(code).unwrap(), "mock error").into_response(),
            Reply::Raw(text) => ([("content-type", "application/json")], text).into_response(),
        }
    }
}
