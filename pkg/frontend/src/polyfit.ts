/** Least-squares polynomial guide curves.
 *
 * Fits on standardized x for conditioning and solves the normal equations by
 * Gaussian elimination; degrees beyond n-1 are clamped so the system stays
 * determined.
 */

export function polyfit(x: number[], y: number[], degree: number): (v: number) => number {
  const n = x.length;
  const deg = Math.max(0, Math.min(degree, n - 1));
  const mean = x.reduce((a, b) => a + b, 0) / n;
  const spread = Math.max(...x) - Math.min(...x) || 1;
  const t = x.map((v) => (v - mean) / spread);

  const m = deg + 1;
  const ata: number[][] = Array.from({ length: m }, () => new Array(m).fill(0));
  const atb: number[] = new Array(m).fill(0);
  for (let i = 0; i < n; i++) {
    const powers: number[] = [1];
    for (let p = 1; p < m; p++) powers.push(powers[p - 1] * t[i]);
    for (let r = 0; r < m; r++) {
      atb[r] += powers[r] * y[i];
      for (let c = 0; c < m; c++) ata[r][c] += powers[r] * powers[c];
    }
  }
  const coeffs = solve(ata, atb);
  return (v: number) => {
    const u = (v - mean) / spread;
    let acc = 0;
    for (let p = m - 1; p >= 0; p--) acc = acc * u + coeffs[p];
    return acc;
  };
}

function solve(a: number[][], b: number[]): number[] {
  const n = b.length;
  const m = a.map((row, i) => [...row, b[i]]);
  for (let col = 0; col < n; col++) {
    let pivot = col;
    for (let r = col + 1; r < n; r++) {
      if (Math.abs(m[r][col]) > Math.abs(m[pivot][col])) pivot = r;
    }
    [m[col], m[pivot]] = [m[pivot], m[col]];
    const p = m[col][col];
    if (Math.abs(p) < 1e-14) throw new Error("singular polynomial fit");
    for (let r = 0; r < n; r++) {
      if (r === col) continue;
      const f = m[r][col] / p;
      for (let c = col; c <= n; c++) m[r][c] -= f * m[col][c];
    }
  }
  return m.map((row, i) => row[n] / row[i]);
}
