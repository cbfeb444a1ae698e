import { describe, expect, it } from 'vitest'
import { allPaths, ancestors, filterTree, indexTree, initialExpansion } from '../src/taxonomy'

const tree = {
  name: 'TOP',
  children: [
    {
      name: 'Name',
      children: [
        { name: 'Person', children: [{ name: 'Name' }, { name: 'Fictional' }] },
        { name: 'Location', children: [{ name: 'City' }] },
      ],
    },
    { name: 'Numex', children: [{ name: 'Money' }] },
  ],
}

describe('indexTree', () => {
  it('drops TOP and addresses nodes by dotted path', () => {
    const roots = indexTree(tree)
    expect(roots.map((r) => r.path)).toEqual(['Name', 'Numex'])
    const paths = allPaths(roots)
    expect(paths.has('Name.Person.Name')).toBe(true)
    expect(paths.has('Name.Location.City')).toBe(true)
    expect(paths.has('TOP')).toBe(false)
    expect(paths.size).toBe(8)
  })

  it('tracks levels from 1', () => {
    const roots = indexTree(tree)
    expect(roots[0].level).toBe(1)
    expect(roots[0].children[0].children[0].level).toBe(3)
  })

  it('handles names with spaces', () => {
    const roots = indexTree({
      name: 'TOP',
      children: [{ name: 'Timex TOP', children: [{ name: 'Timex Relative' }] }],
    })
    expect(allPaths(roots).has('Timex TOP.Timex Relative')).toBe(true)
  })
})

describe('ancestors / expansion', () => {
  it('lists shallowest first', () => {
    expect(ancestors('Name.Person.Name')).toEqual(['Name', 'Name.Person'])
    expect(ancestors('Numex')).toEqual([])
  })

  it('expands the proposed chain', () => {
    const expanded = initialExpansion('Name.Person.Name')
    expect(expanded.has('Name')).toBe(true)
    expect(expanded.has('Name.Person')).toBe(true)
    expect(expanded.has('Name.Person.Name')).toBe(true)
    expect(expanded.has('Numex')).toBe(false)
  })
})

describe('filterTree', () => {
  it('keeps matching branches with their ancestors', () => {
    const filtered = filterTree(indexTree(tree), 'city')
    expect(filtered).toHaveLength(1)
    expect(filtered[0].path).toBe('Name')
    expect(filtered[0].children).toHaveLength(1)
    expect(filtered[0].children[0].children[0].path).toBe('Name.Location.City')
  })

  it('empty query returns everything', () => {
    expect(filterTree(indexTree(tree), '  ')).toHaveLength(2)
  })
})
