/** Tree helpers for the collapsible hierarchy browser. */
import type { TaxonomyNode } from './api'

export interface PathNode {
  path: string
  name: string
  level: number
  children: PathNode[]
}

/** Turn the served tree into path-addressed nodes; the TOP root is dropped,
 * so every returned node is a legal relabel target. */
export function indexTree(root: TaxonomyNode): PathNode[] {
  const build = (node: TaxonomyNode, prefix: string, level: number): PathNode => {
    const path = prefix ? `${prefix}.${node.name}` : node.name
    return {
      path,
      name: node.name,
      level,
      children: (node.children ?? []).map((child) => build(child, path, level + 1)),
    }
  }
  return (root.children ?? []).map((child) => build(child, '', 1))
}

export function allPaths(roots: PathNode[]): Set<string> {
  const out = new Set<string>()
  const walk = (node: PathNode) => {
    out.add(node.path)
    node.children.forEach(walk)
  }
  roots.forEach(walk)
  return out
}

/** Ancestor chain of a dotted path, shallowest first, excluding the path. */
export function ancestors(path: string): string[] {
  const segments = path.split('.')
  return segments.slice(0, -1).map((_, i) => segments.slice(0, i + 1).join('.'))
}

/** Paths that should start expanded when browsing from a proposed label. */
export function initialExpansion(proposed: string): Set<string> {
  return new Set(ancestors(proposed).concat(proposed))
}

export function filterTree(roots: PathNode[], query: string): PathNode[] {
  if (!query.trim()) return roots
  const needle = query.toLowerCase()
  const keep = (node: PathNode): PathNode | null => {
    const children = node.children.map(keep).filter((c): c is PathNode => c !== null)
    if (node.path.toLowerCase().includes(needle) || children.length > 0) {
      return { ...node, children }
    }
    return null
  }
  return roots.map(keep).filter((n): n is PathNode => n !== null)
}
