export { ApiClient, ApiError, type QueryloomClient } from "./api.js";
export { toRenderModel, type RenderModel, type AxisSeries, type PieSlice } from "./chart.js";
export {
  ChatSession,
  TurnInFlightError,
  openSession,
  type ChatTurnView,
  type SessionMode,
  type TurnState,
} from "./session.js";
export type * from "./types.js";
