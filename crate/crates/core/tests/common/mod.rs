/// Hand-counted molecules: SMILES, heavy atoms, bonds, independent cycles,
/// aromatic atoms, net formal charge.
pub const HAND_CORPUS: [(&str, usize, usize, usize, usize, i32); 38] = [
    ("C", 1, 0, 0, 0, 0),
    ("CC", 2, 1, 0, 0, 0),
    ("CCO", 3, 2, 0, 0, 0),
    ("C=C", 2, 1, 0, 0, 0),
    ("C#N", 2, 1, 0, 0, 0),
    ("CC(=O)O", 4, 3, 0, 0, 0),
    ("c1ccccc1", 6, 6, 1, 6, 0),
    ("Cc1ccccc1", 7, 7, 1, 6, 0),
    ("C1CC1", 3, 3, 1, 0, 0),
    ("C1CCCCC1", 6, 6, 1, 0, 0),
    ("CC(C)C", 4, 3, 0, 0, 0),
    ("CC(C)(C)C", 5, 4, 0, 0, 0),
    ("O=C=O", 3, 2, 0, 0, 0),
    ("[Na+].[Cl-]", 2, 0, 0, 0, 0),
    ("CCN(CC)CC", 7, 6, 0, 0, 0),
    ("c1ccc2ccccc2c1", 10, 11, 2, 10, 0),
    ("OC(=O)c1ccccc1O", 10, 10, 1, 6, 0),
    ("CC(=O)Oc1ccccc1C(=O)O", 13, 13, 1, 6, 0),
    ("C1CCNCC1", 6, 6, 1, 0, 0),
    ("c1ccncc1", 6, 6, 1, 6, 0),
    ("c1cc[nH]c1", 5, 5, 1, 5, 0),
    ("C1=CC=CC=C1", 6, 6, 1, 0, 0),
    ("N#N", 2, 1, 0, 0, 0),
    ("ClC(Cl)(Cl)Cl", 5, 4, 0, 0, 0),
    ("OCC(O)CO", 6, 5, 0, 0, 0),
    ("C(C(=O)O)N", 5, 4, 0, 0, 0),
    ("CN1C=NC2=C1C(=O)N(C(=O)N2C)C", 14, 15, 2, 0, 0),
    ("[NH4+]", 1, 0, 0, 0, 1),
    ("C1CC2CCC1C2", 7, 8, 2, 0, 0),
    ("CC.O", 3, 1, 0, 0, 0),
    ("C%10CC%10", 3, 3, 1, 0, 0),
    ("[13CH4]", 1, 0, 0, 0, 0),
    ("F/C=C/F", 4, 3, 0, 0, 0),
    ("N[C@@H](C)C(=O)O", 6, 5, 0, 0, 0),
    ("c1ccc2c(c1)[nH]c1ccccc12", 13, 15, 3, 13, 0),
    ("O", 1, 0, 0, 0, 0),
    ("[O-][N+](=O)C", 4, 3, 0, 0, 0),
    ("C1CCC2(CC1)CCCC2", 10, 11, 2, 0, 0),
];
