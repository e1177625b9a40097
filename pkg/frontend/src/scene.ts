/** Renderer-independent scene graph shared by the SVG and PNG backends. */

export type Shape =
  | { kind: "line"; x1: number; y1: number; x2: number; y2: number; color: string; width: number; dash?: string; cls?: string }
  | { kind: "polyline"; pts: [number, number][]; color: string; width: number; dash?: string; cls?: string }
  | { kind: "circle"; cx: number; cy: number; r: number; fill: string; cls?: string }
  | { kind: "rect"; x: number; y: number; w: number; h: number; fill: string; stroke?: string; cls?: string }
  | {
      kind: "text";
      x: number;
      y: number;
      text: string;
      size: number;
      color: string;
      anchor: "start" | "middle" | "end";
      rotate?: number;
      cls?: string;
    };

export interface Scene {
  width: number;
  height: number;
  background: string;
  shapes: Shape[];
}

export const PALETTE = ["#1f6fb2", "#d1495b", "#2e933c", "#8c5fae", "#b8860b", "#4f6367"];
