/**
 * Client-side session state: a pure reducer over incoming server messages.
 *
 * The client has zero authority: every rendered quantity originates from
 * SCENARIO_START / STATE / COLLISION / EPISODE_END / SIM_END payloads.
 * There is no client-side physics of any kind.
 */

import type { DecisionRecord, Message, ScenarioStartMsg, StateMsg } from './protocol.js'

export type Phase =
  | 'menu'
  | 'connecting'
  | 'running'
  | 'collided'
  | 'results'
  | 'error'

export interface SessionState {
  phase: Phase
  sessionId: string
  layout: ScenarioStartMsg | null
  latest: StateMsg | null
  collisionText: string
  results: DecisionRecord[]
  errorText: string
}

export function initialState(): SessionState {
  return {
    phase: 'menu',
    sessionId: '',
    layout: null,
    latest: null,
    collisionText: '',
    results: [],
    errorText: '',
  }
}

export function reduce(state: SessionState, msg: Message): SessionState {
  switch (msg.type) {
    case 'WELCOME':
      return { ...state, phase: 'connecting', sessionId: String(msg.session_id) }
    case 'SCENARIO_START':
      return {
        ...state,
        phase: 'running',
        layout: msg as ScenarioStartMsg,
        latest: null,
        collisionText: '',
      }
    case 'STATE':
      return { ...state, latest: msg as StateMsg }
    case 'COLLISION':
      // overlay shows the server's display text verbatim
      return { ...state, phase: 'collided', collisionText: String(msg.display) }
    case 'EPISODE_END':
      return { ...state, results: [...state.results, msg.record as DecisionRecord] }
    case 'SIM_END':
      return { ...state, phase: 'results', results: msg.records as DecisionRecord[] }
    case 'ERROR':
      return { ...state, phase: 'error', errorText: `${msg.code}: ${msg.message}` }
    default:
      return state
  }
}

/** Connection dropped outside a clean SIM_END: disable input, offer retry. */
export function connectionLost(state: SessionState): SessionState {
  if (state.phase === 'results' || state.phase === 'error') return state
  return { ...state, phase: 'error', errorText: 'connection to the server was lost' }
}
