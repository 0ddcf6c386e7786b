//! Quadrature rules and nodal shape functions.
//!
//! Domain integrals use the 7-point symmetric triangle rule (degree 5),
//! exact for products of linear conductivity with gradients of quadratic
//! potential bases. Electrode edge integrals use 4-point Gauss-Legendre,
//! exact for products of quadratic traces.

/// Barycentric coordinates and weights of the 7-point degree-5 triangle
/// rule. Weights sum to one; multiply by the triangle area.
pub const TRI7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_770;
    const B1: f64 = 0.470_142_064_105_115;
    const W1: f64 = 0.132_394_152_788_506;
    const A2: f64 = 0.797_426_985_353_087;
    const B2: f64 = 0.101_286_507_323_456;
    const W2: f64 = 0.125_939_180_544_827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// Nodes and weights of 4-point Gauss-Legendre on [0, 1].
pub const GAUSS4: [(f64, f64); 4] = {
    const X1: f64 = 0.339_981_043_584_856_3;
    const X2: f64 = 0.861_136_311_594_052_6;
    const W1: f64 = 0.652_145_154_862_546_1 / 2.0;
    const W2: f64 = 0.347_854_845_137_453_9 / 2.0;
    [
        ((1.0 - X2) / 2.0, W2),
        ((1.0 - X1) / 2.0, W1),
        ((1.0 + X1) / 2.0, W1),
        ((1.0 + X2) / 2.0, W2),
    ]
};

/// Values of the six quadratic shape functions at barycentric `l`,
/// local order (v0, v1, v2, m01, m12, m20).
#[inline]
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Gradients of the six quadratic shape functions at barycentric `l`, given
/// the (constant) barycentric gradients `g` of the triangle.
#[inline]
pub fn p2_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    for v in 0..3 {
        let c = 4.0 * l[v] - 1.0;
        out[v] = [c * g[v][0], c * g[v][1]];
    }
    let pairs = [(0usize, 1usize), (1, 2), (2, 0)];
    for (k, &(a, b)) in pairs.iter().enumerate() {
        out[3 + k] = [
            4.0 * (l[b] * g[a][0] + l[a] * g[b][0]),
            4.0 * (l[b] * g[a][1] + l[a] * g[b][1]),
        ];
    }
    out
}

/// Constant barycentric gradients of a triangle with vertices `p`.
/// Returns (gradients, area).
#[inline]
pub fn barycentric_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = 0.5 * det;
    let g = [
        [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
        [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
        [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
    ];
    (g, area)
}

/// Values of the three quadratic trace functions on an edge at parameter
/// `t in [0, 1]`, local order (endpoint a, endpoint b, midpoint).
#[inline]
pub fn edge_p2_values(t: f64) -> [f64; 3] {
    [
        (1.0 - t) * (1.0 - 2.0 * t),
        t * (2.0 * t - 1.0),
        4.0 * t * (1.0 - t),
    ]
}
