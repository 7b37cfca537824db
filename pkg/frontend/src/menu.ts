/**
 * Start menu data flow: the scenario list comes from the server's
 * GET /scenarios endpoint; the subject picks a file and either the whole
 * sequence or a single scenario, which becomes the HELLO config
 * (role=human, pacing=realtime always).
 */

import type { HelloConfig } from './protocol.js'

export interface ScenarioEntry {
  test_num: number
  name: string
}

export interface FileEntry {
  id: string
  scenarios: ScenarioEntry[]
}

export interface ScenarioListing {
  files: FileEntry[]
}

export async function fetchListing(baseUrl: string): Promise<ScenarioListing> {
  const response = await fetch(`${baseUrl}/scenarios`)
  if (!response.ok) {
    throw new Error(`scenario list unavailable: HTTP ${response.status}`)
  }
  const listing = (await response.json()) as ScenarioListing
  if (!Array.isArray(listing.files) || listing.files.length === 0) {
    throw new Error('scenario list unavailable: server returned no files')
  }
  return listing
}

export function buildHelloConfig(
  fileId: string,
  mode: 'all' | { testNum: number },
): HelloConfig {
  if (mode === 'all') {
    return { scenario_file: fileId, mode: 'all', pacing: 'realtime', role: 'human' }
  }
  return {
    scenario_file: fileId,
    mode: 'single',
    test_num: mode.testNum,
    pacing: 'realtime',
    role: 'human',
  }
}
