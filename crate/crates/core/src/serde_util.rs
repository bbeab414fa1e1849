//! `[x, y, z]` wire form for nalgebra vectors.

pub mod vec3 {
    use nalgebra::{Scalar, Vector3};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Scalar + Serialize + Copy, S: Serializer>(v: &Vector3<T>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, T: Scalar + Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<Vector3<T>, D::Error> {
        <[T; 3]>::deserialize(d).map(Vector3::from)
    }
}

pub mod opt_vec3 {
    use nalgebra::{Scalar, Vector3};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Scalar + Serialize + Copy, S: Serializer>(
        v: &Option<Vector3<T>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        v.map(|v| [v.x, v.y, v.z]).serialize(s)
    }

    pub fn deserialize<'de, T: Scalar + Deserialize<'de>, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<Vector3<T>>, D::Error> {
        Option::<[T; 3]>::deserialize(d).map(|v| v.map(Vector3::from))
    }
}

pub mod vec3_list {
    use nalgebra::{Scalar, Vector3};
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Scalar + serde::Serialize + Copy, S: Serializer>(
        v: &[Vector3<T>],
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for p in v {
            seq.serialize_element(&[p.x, p.y, p.z])?;
        }
        seq.end()
    }

    pub fn deserialize<'de, T: Scalar + Deserialize<'de>, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Vec<Vector3<T>>, D::Error> {
        Vec::<[T; 3]>::deserialize(d).map(|v| v.into_iter().map(Vector3::from).collect())
    }
}
