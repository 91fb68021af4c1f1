// Wire types for the live link service. Shapes mirror the JSON the
// service emits; nothing here is computed client-side.

export interface LinkEvent {
  seq: number;
  kind: "spray" | "sample" | "symbol" | "char" | "frame_done";
  t_sim: number;
  data: Record<string, unknown>;
}

export interface SprayData {
  tx: number;
  molecules: number;
}

export interface SampleData {
  rx: number;
  v: number;
}

export interface SymbolData {
  rx: number;
  slot: number;
  statistic: number;
  threshold: number;
  bit: number;
}

export interface CharData {
  rx: number;
  index: number;
  char: string;
  position: number;
}

export interface LinkReport {
  mode: string;
  seed: number;
  backend: string;
  message_sent: string;
  message_decoded: string;
  rx_decoded: string[];
  payload_bits: number;
  air_time_s: number;
  data_rate_bps: number;
  bit_errors: number;
  bits_compared: number;
  ber: number;
  char_errors: number;
  cer: number;
  [extra: string]: unknown;
}

export interface SessionStatus {
  id: string;
  state: "idle" | "transmitting" | "done" | "failed";
  mode: string;
  seed: number;
  backend: string;
  time_scale: number;
  message: string | null;
  error: string | null;
  events_total: number;
  events_released: number;
}

export interface SessionOverrides {
  mode?: string;
  seed?: number;
  backend?: string;
  particles?: number;
  ili_cancellation?: boolean;
  noise?: number;
  time_scale?: number;
}

export type ConnectionStatus =
  | "idle"
  | "connecting"
  | "live"
  | "reconnecting"
  | "ended";
