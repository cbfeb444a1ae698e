/** Typed client for the review service HTTP API. */

export interface Task {
  task_id: string
  doc_id: string
  span_id: string
  text: string
  char_start: number
  char_end: number
  proposed_label: string
  candidate_labels: string[]
  status: 'open' | 'done'
}

export interface TaxonomyNode {
  name: string
  children?: TaxonomyNode[]
}

export interface Progress {
  tasks: number
  done: number
  open: number
  verdicts: number
  per_annotator: Record<string, number>
}

export type VerdictAction = 'accept' | 'reject' | 'relabel'

export interface VerdictBody {
  task_id: string
  annotator_id: string
  action: VerdictAction
  label?: string
}

export type NextTask = { kind: 'task'; task: Task } | { kind: 'done' }

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message)
  }
}

async function detail(response: Response): Promise<string> {
  try {
    const body = await response.json()
    return typeof body.detail === 'string' ? body.detail : response.statusText
  } catch {
    return response.statusText
  }
}

/** All calls are same-origin by default so the bundle can be mounted at /ui. */
export class ReviewApi {
  constructor(readonly base: string = '') {}

  async nextTask(annotator: string): Promise<NextTask> {
    const url = `${this.base}/tasks/next?annotator=${encodeURIComponent(annotator)}`
    const response = await fetch(url)
    if (response.status === 204) return { kind: 'done' }
    if (!response.ok) throw new ApiError(response.status, await detail(response))
    return { kind: 'task', task: (await response.json()) as Task }
  }

  async submitVerdict(body: VerdictBody): Promise<{ status: number }> {
    const response = await fetch(`${this.base}/verdicts`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    })
    if (response.status === 201 || response.status === 409) {
      return { status: response.status }
    }
    throw new ApiError(response.status, await detail(response))
  }

  async taxonomy(): Promise<TaxonomyNode> {
    const response = await fetch(`${this.base}/taxonomy`)
    if (!response.ok) throw new ApiError(response.status, await detail(response))
    return (await response.json()) as TaxonomyNode
  }

  async progress(): Promise<Progress> {
    const response = await fetch(`${this.base}/progress`)
    if (!response.ok) throw new ApiError(response.status, await detail(response))
    return (await response.json()) as Progress
  }
}
