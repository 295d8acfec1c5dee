export interface AtomView {
  symbol: string;
  x: number;
  y: number;
  h_count: number;
}

export interface BondView {
  a: number;
  b: number;
  multiplicity: number;
}

export interface MoleculeView {
  atoms: AtomView[];
  bonds: BondView[];
}

export interface Progress {
  current: number;
  total: number;
}

export interface PairPayload {
  round: number;
  progress: Progress;
  pair_id: string;
  formula: string;
  left: MoleculeView;
  right: MoleculeView;
}

export interface RoundResult {
  round: number;
  pair_id: string;
  choice: string;
  correct: boolean;
}

export interface SessionResult {
  accuracy: number;
  correct: number;
  total: number;
  rounds: RoundResult[];
}

export type Choice = "left" | "right";
export type Expertise = "high_school" | "undergraduate" | "postgraduate";
