/** Client-side containment badges.
 *
 * Deliberately duplicates the server's coverage metric as an independent
 * cross-check surface: per-result badge = |Q ∩ R| / |Q|, and the union
 * badge pools the element sets of the whole result list.
 */

export function containment(queryIds: number[], resultIds: number[] | null): number {
  if (queryIds.length === 0) throw new Error("empty query element set");
  if (!resultIds) return 0;
  const have = new Set(resultIds);
  let hit = 0;
  for (const id of new Set(queryIds)) if (have.has(id)) hit += 1;
  return hit / new Set(queryIds).size;
}

export function unionCoverage(
  queryIds: number[],
  resultSets: (number[] | null)[],
): number {
  const union: number[] = [];
  for (const set of resultSets) if (set) union.push(...set);
  return containment(queryIds, union);
}

export interface CoverageBadges {
  perResult: number[];
  union: number;
}

/** Badges for one condition modality over an ordered result list. */
export function coverageBadges(
  queryIds: number[],
  resultSets: (number[] | null)[],
): CoverageBadges {
  return {
    perResult: resultSets.map((set) => containment(queryIds, set)),
    union: unionCoverage(queryIds, resultSets),
  };
}
