// Chart geometry. Series values are lifted verbatim from the round records
// (no smoothing, no derived quantities); everything here is pure math so the
// panel's numbers can be checked against the results file directly.
export function apSeries(records) {
    return { x: records.map((r) => r.labeled), y: records.map((r) => r.ap) };
}
export function positivesSeries(records) {
    return { x: records.map((r) => r.labeled), y: records.map((r) => r.positives) };
}
/** Final pool fraction, the headline cost number; null before any rounds. */
export function poolFractionReadout(records) {
    const last = records[records.length - 1];
    return last === undefined ? null : last.pool_frac;
}
const EMPTY = { segments: [], markers: [], xTicks: [], yTicks: [] };
function scale(d0, d1, r0, r1) {
    if (d1 === d0)
        return () => (r0 + r1) / 2;
    const f = (r1 - r0) / (d1 - d0);
    return (v) => r0 + (v - d0) * f;
}
/** Rounded tick values covering [min, max], steps of 1/2/5 times a power of 10. */
export function ticks(min, max, count = 5) {
    if (!(max > min))
        return [min];
    const raw = (max - min) / Math.max(1, count);
    const mag = 10 ** Math.floor(Math.log10(raw));
    const err = raw / mag;
    const step = (err >= 7.07 ? 10 : err >= 3.16 ? 5 : err >= 1.41 ? 2 : 1) * mag;
    const first = Math.ceil(min / step);
    const last = Math.floor(max / step + 1e-9);
    const out = [];
    for (let i = first; i <= last; i++) {
        out.push(Number((i * step).toPrecision(12)));
    }
    return out;
}
const round2 = (v) => Math.round(v * 100) / 100;
export function chartGeometry(series, box) {
    if (series.x.length === 0)
        return EMPTY;
    const ys = series.y.filter((v) => v !== null);
    if (ys.length === 0)
        return EMPTY;
    const x0 = Math.min(...series.x);
    const x1 = Math.max(...series.x);
    // zero-based y axis: both charted quantities (AP, positives) live on it
    const y0 = Math.min(0, ...ys);
    const y1 = Math.max(...ys);
    const px = scale(x0, x1, box.pad, box.width - box.pad);
    const py = scale(y0, y1, box.height - box.pad, box.pad); // SVG y grows down
    const markers = [];
    const segments = [];
    let run = [];
    const flush = () => {
        if (run.length >= 2)
            segments.push(run.join(" "));
        run = [];
    };
    for (let i = 0; i < series.x.length; i++) {
        const yv = series.y[i];
        const xv = series.x[i];
        if (yv === null || yv === undefined || xv === undefined) {
            flush();
            continue;
        }
        const point = { x: round2(px(xv)), y: round2(py(yv)) };
        markers.push(point);
        run.push(`${point.x},${point.y}`);
    }
    flush();
    return {
        segments,
        markers,
        xTicks: ticks(x0, x1).map((value) => ({ value, px: round2(px(value)) })),
        yTicks: ticks(y0, y1).map((value) => ({ value, py: round2(py(value)) })),
    };
}
