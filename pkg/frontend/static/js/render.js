const SCALE = 42;
const PADDING = 30;
const BOND_GAP = 3.2;
const ATOM_RADIUS = 2.6;
const LABEL_CLEAR = 9;
function atomLabel(atom) {
    // carbons stay unlabeled; heteroatoms show their symbol plus hydrogens
    if (atom.symbol === "C")
        return null;
    if (atom.h_count === 0)
        return atom.symbol;
    if (atom.h_count === 1)
        return `${atom.symbol}H`;
    return `${atom.symbol}H${atom.h_count}`;
}
function escapeXml(text) {
    return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
function line(x1, y1, x2, y2) {
    return `<line x1="${x1.toFixed(1)}" y1="${y1.toFixed(1)}" x2="${x2.toFixed(1)}" y2="${y2.toFixed(1)}" />`;
}
function bondClass(multiplicity) {
    return ["", "bond-single", "bond-double", "bond-triple"][multiplicity] ?? "bond-single";
}
function payloadIsValid(mol) {
    if (!mol || !Array.isArray(mol.atoms) || !Array.isArray(mol.bonds))
        return false;
    if (mol.atoms.length === 0)
        return false;
    for (const atom of mol.atoms) {
        if (!Number.isFinite(atom.x) || !Number.isFinite(atom.y))
            return false;
    }
    for (const bond of mol.bonds) {
        if (bond.a < 0 || bond.a >= mol.atoms.length)
            return false;
        if (bond.b < 0 || bond.b >= mol.atoms.length)
            return false;
    }
    return true;
}
/** Pure SVG scene for one molecule payload; error card on malformed input. */
export function renderMolecule(mol) {
    if (!payloadIsValid(mol)) {
        return `<div class="error-card">This structure could not be displayed.</div>`;
    }
    const xs = mol.atoms.map((a) => a.x * SCALE);
    const ys = mol.atoms.map((a) => -a.y * SCALE); // SVG y axis points down
    const minX = Math.min(...xs) - PADDING;
    const minY = Math.min(...ys) - PADDING;
    const width = Math.max(...xs) - Math.min(...xs) + 2 * PADDING;
    const height = Math.max(...ys) - Math.min(...ys) + 2 * PADDING;
    const labeled = mol.atoms.map((a) => atomLabel(a) !== null);
    const parts = [];
    for (const bond of mol.bonds) {
        const x1 = xs[bond.a], y1 = ys[bond.a];
        const x2 = xs[bond.b], y2 = ys[bond.b];
        const dx = x2 - x1, dy = y2 - y1;
        const len = Math.hypot(dx, dy) || 1;
        // trim the bond line around labeled atoms so text stays readable
        const t1 = labeled[bond.a] ? LABEL_CLEAR / len : 0;
        const t2 = labeled[bond.b] ? LABEL_CLEAR / len : 0;
        const ax = x1 + dx * t1, ay = y1 + dy * t1;
        const bx = x2 - dx * t2, by = y2 - dy * t2;
        const px = -dy / len, py = dx / len;
        const strokes = [];
        const m = Math.min(Math.max(bond.multiplicity, 1), 3);
        const offsets = m === 1 ? [0] : m === 2 ? [-BOND_GAP, BOND_GAP] : [-BOND_GAP * 1.6, 0, BOND_GAP * 1.6];
        for (const off of offsets) {
            strokes.push(line(ax + px * off, ay + py * off, bx + px * off, by + py * off));
        }
        parts.push(`<g class="bond ${bondClass(m)}">${strokes.join("")}</g>`);
    }
    mol.atoms.forEach((atom, k) => {
        const label = atomLabel(atom);
        if (label === null) {
            parts.push(`<circle class="atom atom-carbon" cx="${xs[k].toFixed(1)}" cy="${ys[k].toFixed(1)}" r="${ATOM_RADIUS}" />`);
        }
        else {
            parts.push(`<circle class="atom atom-hetero" cx="${xs[k].toFixed(1)}" cy="${ys[k].toFixed(1)}" r="${ATOM_RADIUS}" />` +
                `<text class="atom-label" x="${xs[k].toFixed(1)}" y="${(ys[k] + 4).toFixed(1)}">${escapeXml(label)}</text>`);
        }
    });
    const viewBox = `${minX.toFixed(1)} ${minY.toFixed(1)} ${width.toFixed(1)} ${height.toFixed(1)}`;
    return `<svg class="molecule" viewBox="${viewBox}" preserveAspectRatio="xMidYMid meet" xmlns="http://www.w3.org/2000/svg">${parts.join("")}</svg>`;
}
